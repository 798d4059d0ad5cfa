use crate::error::{DfnError, Result};
use crate::geometry::{Network, Trace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointMarker {
    /// Endpoint on the Dirichlet boundary, with the boundary value there.
    Dirichlet(f64),
    Free,
}

impl EndpointMarker {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, EndpointMarker::Dirichlet(_))
    }
}

/// Uniform 1D mesh of a trace in arc length.
#[derive(Debug, Clone)]
pub struct SegMesh {
    pub trace_id: usize,
    pub coords: Vec<f64>,
    /// Mean spacing.
    pub meshsize: f64,
    pub endpoint_markers: [EndpointMarker; 2],
}

impl SegMesh {
    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_elements(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.coords.last().unwrap()
    }

    pub fn element_length(&self, k: usize) -> f64 {
        self.coords[k + 1] - self.coords[k]
    }

    /// Whether node `k` carries an unknown (Dirichlet endpoints do not).
    pub fn is_free(&self, k: usize) -> bool {
        let last = self.coords.len() - 1;
        !((k == 0 && self.endpoint_markers[0].is_dirichlet()) || (k == last && self.endpoint_markers[1].is_dirichlet()))
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&k| self.is_free(k)).collect()
    }

    /// Element containing arc length `s` (the left one at interior breakpoints) and the
    /// two local hat values there.
    pub fn locate(&self, s: f64) -> (usize, [f64; 2]) {
        let n = self.num_elements();
        let k = match self.coords.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.saturating_sub(1).min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        };
        let t = (s - self.coords[k]) / self.element_length(k);
        (k, [1.0 - t, t])
    }

    /// Evaluates a nodal P1 field at arc length `s`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let (k, w) = self.locate(s);
        w[0] * values[k] + w[1] * values[k + 1]
    }
}

/// Meshes a trace uniformly with spacing at most `delta`.
///
/// An endpoint is Dirichlet when it lies on a Dirichlet edge of either adjacent
/// fracture; the value is taken from the lower-index fracture that prescribes one.
pub fn mesh_trace(t: &Trace, delta: f64, network: &Network) -> Result<SegMesh> {
    if !(delta > 0.0 && delta < t.length) {
        return Err(DfnError::Mesh(format!(
            "trace {}: mesh size {delta} must be positive and below the trace length {}",
            t.id, t.length
        )));
    }
    let n = ((t.length / delta) - 1e-9).ceil().max(1.0) as usize;
    let mut coords: Vec<f64> = (0..=n).map(|k| t.length * k as f64 / n as f64).collect();
    coords[n] = t.length;
    let pair = network.fractures_of_trace(t.id);
    let marker = |s: f64| {
        pair.iter()
            .enumerate()
            .find_map(|(side, &fi)| network.fracture(fi).dirichlet_value(t.params[side].at(s)))
            .map_or(EndpointMarker::Free, EndpointMarker::Dirichlet)
    };
    Ok(SegMesh {
        trace_id: t.id,
        meshsize: t.length / n as f64,
        endpoint_markers: [marker(0.0), marker(t.length)],
        coords,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_network, BoundaryCondition, Fracture, LocalFn};

    fn net(bc: BoundaryCondition) -> Network {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let z = [0.0, 0.0, 1.0];
        let f1 = Fracture::rectangle(1, [0.0; 3], [x, y], [-1.0, 1.0], [0.0, 1.0], vec![bc.clone(); 4]).unwrap();
        let f2 = Fracture::rectangle(2, [0.0; 3], [z, y], [-1.0, 1.0], [0.0, 1.0], vec![bc; 4]).unwrap();
        build_network(vec![f1, f2]).unwrap()
    }

    #[test]
    fn uniform_breakpoints() {
        let n = net(BoundaryCondition::Neumann);
        let sm = mesh_trace(n.trace(0), 0.25, &n).unwrap();
        assert_eq!(sm.coords, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(sm.endpoint_markers, [EndpointMarker::Free; 2]);
        assert_eq!(sm.free_nodes().len(), 5);
        assert!(mesh_trace(n.trace(0), 1.0, &n).is_err());
    }

    #[test]
    fn dirichlet_endpoints() {
        let n = net(BoundaryCondition::Dirichlet(LocalFn::new(|p| 3.0 + p[1])));
        let sm = mesh_trace(n.trace(0), 0.22, &n).unwrap();
        assert_eq!(sm.num_elements(), 5);
        assert_eq!(sm.endpoint_markers, [EndpointMarker::Dirichlet(3.0), EndpointMarker::Dirichlet(4.0)]);
        assert_eq!(sm.free_nodes(), vec![1, 2, 3, 4]);
        assert!((sm.meshsize - 0.2).abs() < 1e-15);
    }

    #[test]
    fn locate_is_left_continuous_inside() {
        let n = net(BoundaryCondition::Neumann);
        let sm = mesh_trace(n.trace(0), 0.25, &n).unwrap();
        assert_eq!(sm.locate(0.0).0, 0);
        assert_eq!(sm.locate(0.5).0, 1);
        assert_eq!(sm.locate(1.0).0, 3);
        let (k, w) = sm.locate(0.6);
        assert_eq!(k, 2);
        assert!((w[1] - 0.4).abs() < 1e-14);
    }
}
