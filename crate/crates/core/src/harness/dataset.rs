use std::path::Path;

use crate::error::{Error, Result};
use crate::graphs::{read_edge_list, EdgeListOptions, Graph};

pub const MACAQUE_NODES: usize = 91;
pub const MACAQUE_EDGES: usize = 1401;

/// Observed size of a loaded dataset graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetCheck {
    pub nodes: usize,
    pub edges: usize,
}

impl DatasetCheck {
    pub fn matches_macaque(&self) -> bool {
        self.nodes == MACAQUE_NODES && self.edges == MACAQUE_EDGES
    }
}

/// Load the macaque cortical network as an unweighted undirected graph.
///
/// A missing or unreadable file is an error. Counts other than 91 nodes and
/// 1401 edges only produce a warning, and the observed counts are returned.
pub fn load_macaque(path: &Path, one_indexed: bool) -> Result<(Graph, DatasetCheck)> {
    if !path.exists() {
        return Err(Error::Dataset(format!(
            "edge list {} not found; supply the macaque cortical network \
             (91 regions, 1401 undirected edges) as a whitespace-separated edge list",
            path.display()
        )));
    }
    let opts = EdgeListOptions {
        one_indexed,
        weighted: false,
        num_nodes: None,
    };
    let g = read_edge_list(path, opts).map_err(|e| Error::Dataset(e.to_string()))?;
    let check = DatasetCheck {
        nodes: g.n(),
        edges: g.edge_count(),
    };
    if !check.matches_macaque() {
        log::warn!(
            "{}: expected {MACAQUE_NODES} nodes / {MACAQUE_EDGES} edges, found {} / {}",
            path.display(),
            check.nodes,
            check.edges
        );
    }
    Ok((g, check))
}
