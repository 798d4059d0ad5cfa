//! Meshes, element operators and dof numbering for a whole network.

use std::sync::Arc;

use crate::analysis::ExactSolution;
use crate::error::{DfnError, Result};
use crate::fem::{
    assemble_coupling_b, assemble_coupling_c, assemble_load, assemble_stiffness, dirichlet_values, flux_jump_matrix,
    CouplingKey, DofMap,
};
use crate::geometry::{LocalFn, Network};
use crate::linalg::SparseMatrix;
use crate::meshing::{build_aux_band, mesh_trace, triangulate_fracture, AuxBandMesh, MeshOptions, SegMesh, TriMesh};
use crate::stabilization::{compute_theta, ResidualMaps, ThetaTable};

/// A network together with its source terms and, when known, its exact solution.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub network: Network,
    /// Source term per fracture, in network order.
    pub forcing: Vec<LocalFn>,
    pub exact: Option<ExactSolution>,
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        network: Network,
        forcing: Vec<LocalFn>,
        exact: Option<ExactSolution>,
    ) -> Result<Self> {
        let nf = network.fractures().len();
        if forcing.len() != nf {
            return Err(DfnError::Dimension(format!("{} forcing terms for {nf} fractures", forcing.len())));
        }
        if let Some(e) = &exact {
            if e.fields.len() != nf {
                return Err(DfnError::Dimension(format!("{} exact fields for {nf} fractures", e.fields.len())));
            }
        }
        Ok(Self { name: name.into(), network, forcing, exact })
    }

    /// Same network with zero forcing and no exact solution.
    pub fn unforced(name: impl Into<String>, network: Network) -> Self {
        let forcing = vec![LocalFn::constant(0.0); network.fractures().len()];
        Self { name: name.into(), network, forcing, exact: None }
    }
}

/// Mesh sizes per fracture and per trace.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshParams {
    pub fracture_delta: Vec<f64>,
    pub trace_delta: Vec<f64>,
    pub options: MeshOptions,
}

impl MeshParams {
    pub fn uniform(network: &Network, delta: f64, options: MeshOptions) -> Self {
        Self {
            fracture_delta: vec![delta; network.fractures().len()],
            trace_delta: vec![delta; network.traces().len()],
            options,
        }
    }
}

/// Data attached to one (fracture, trace) pair.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub key: CouplingKey,
    /// Trace nodes by fracture nodes, `∫_S μ_k v_j`.
    pub b: SparseMatrix,
    pub band: AuxBandMesh,
    pub theta: ThetaTable,
    pub maps: Arc<ResidualMaps>,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub problem: Arc<Problem>,
    pub params: MeshParams,
    pub meshes: Vec<TriMesh>,
    pub stiffness: Vec<SparseMatrix>,
    pub load: Vec<Vec<f64>>,
    /// Edge flux-jump operators per fracture.
    pub jumps: Vec<SparseMatrix>,
    pub segmeshes: Vec<SegMesh>,
    /// Trace mass matrices (the `C` blocks).
    pub trace_mass: Vec<SparseMatrix>,
    /// Ordered by fracture, then by the fracture's trace list.
    pub couplings: Vec<Coupling>,
    pub dofmap: DofMap,
}

impl Discretization {
    pub fn network(&self) -> &Network {
        &self.problem.network
    }

    /// Couplings on trace `m`, lower-id fracture first.
    pub fn couplings_of_trace(&self, m: usize) -> Vec<usize> {
        let mut c: Vec<usize> = (0..self.couplings.len()).filter(|&c| self.couplings[c].key.trace == m).collect();
        c.sort_by_key(|&c| self.couplings[c].key.side);
        c
    }
}

pub fn discretize(problem: Arc<Problem>, params: MeshParams) -> Result<Discretization> {
    let net = &problem.network;
    let nf = net.fractures().len();
    let nt = net.traces().len();
    if params.fracture_delta.len() != nf || params.trace_delta.len() != nt {
        return Err(DfnError::Dimension(format!(
            "mesh sizes given for {} fractures and {} traces, network has {nf} and {nt}",
            params.fracture_delta.len(),
            params.trace_delta.len()
        )));
    }
    let mut meshes = Vec::with_capacity(nf);
    for (f, &d) in net.fractures().iter().zip(&params.fracture_delta) {
        meshes.push(triangulate_fracture(f, d, params.options)?);
    }
    let stiffness: Vec<SparseMatrix> =
        net.fractures().iter().zip(&meshes).map(|(f, m)| assemble_stiffness(m, f.permeability())).collect();
    let load: Vec<Vec<f64>> = meshes.iter().zip(&problem.forcing).map(|(m, g)| assemble_load(m, g)).collect();
    let jumps: Vec<SparseMatrix> = net.fractures().iter().zip(&meshes).map(|(f, m)| flux_jump_matrix(m, f)).collect();

    let mut segmeshes = Vec::with_capacity(nt);
    for (t, &d) in net.traces().iter().zip(&params.trace_delta) {
        segmeshes.push(mesh_trace(t, d, net)?);
    }
    let trace_mass: Vec<SparseMatrix> = segmeshes.iter().map(assemble_coupling_c).collect();

    let mut couplings = Vec::new();
    for i in 0..nf {
        for &m in net.traces_of_fracture(i) {
            let side = net.side_of(m, i).expect("trace lists are consistent");
            let trace = net.trace(m);
            let sm = &segmeshes[m];
            let b = assemble_coupling_b(&meshes[i], sm, &trace.params[side])?;
            let band = build_aux_band(net.fracture(i), i, trace, side, sm, net.separation())?;
            let theta = compute_theta(&band, &meshes[i]);
            let maps = Arc::new(ResidualMaps::build(&band, &theta, &jumps[i], &trace_mass[m], &problem.forcing[i]));
            couplings.push(Coupling { key: CouplingKey { fracture: i, trace: m, side }, b, band, theta, maps });
        }
    }

    let u_sizes: Vec<usize> = meshes.iter().map(TriMesh::num_nodes).collect();
    let lambda_sizes: Vec<usize> = couplings.iter().map(|c| segmeshes[c.key.trace].num_nodes()).collect();
    let psi_sizes: Vec<usize> = segmeshes.iter().map(SegMesh::num_nodes).collect();
    let mut dofmap = DofMap::new(&u_sizes, couplings.iter().map(|c| c.key).collect(), &lambda_sizes, &psi_sizes);
    let mut fixed = vec![None; dofmap.total];
    for i in 0..nf {
        for (k, v) in dirichlet_values(&meshes[i], net.fracture(i)).into_iter().enumerate() {
            fixed[dofmap.u[i].start + k] = v;
        }
    }
    for (c, coupling) in couplings.iter().enumerate() {
        let sm = &segmeshes[coupling.key.trace];
        for k in 0..sm.num_nodes() {
            if !sm.is_free(k) {
                fixed[dofmap.lambda[c].start + k] = Some(0.0);
            }
        }
    }
    for (m, sm) in segmeshes.iter().enumerate() {
        let last = sm.num_nodes() - 1;
        for (end, k) in [(0, 0), (1, last)] {
            if let crate::meshing::EndpointMarker::Dirichlet(v) = sm.endpoint_markers[end] {
                fixed[dofmap.psi[m].start + k] = Some(v);
            }
        }
    }
    dofmap.set_fixed(fixed);

    Ok(Discretization { problem, params, meshes, stiffness, load, jumps, segmeshes, trace_mass, couplings, dofmap })
}
