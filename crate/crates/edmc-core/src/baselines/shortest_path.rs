use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use super::mds::{mds_localize, MdsEmbedding};
use crate::error::{Error, Result};
use crate::observation::ObservedMatrix;

/// Connected components of the known-pair graph, each sorted, ordered by
/// their smallest member.
pub fn connected_components(obs: &ObservedMatrix) -> Vec<Vec<usize>> {
    let n = obs.len();
    let mut label = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        let mut stack = vec![start];
        label[start] = id;
        while let Some(u) = stack.pop() {
            for v in obs.mask().neighbors(u) {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Fill every missing distance with the length of the shortest path through
/// known edges (Floyd–Warshall). Known distances are returned unchanged.
/// Returns plain distances, not squares.
pub fn shortest_path_complete(obs: &ObservedMatrix) -> Result<DMatrix<f64>> {
    let n = obs.len();
    let components = connected_components(obs);
    if components.len() > 1 {
        return Err(Error::Disconnected { components });
    }
    let mut dist = DMatrix::from_element(n, n, f64::INFINITY);
    for i in 0..n {
        dist[(i, i)] = 0.0;
    }
    for (i, j, v) in obs.known() {
        let d = libm::sqrt(v.max(0.0));
        dist[(i, j)] = d;
        dist[(j, i)] = d;
    }
    let mut path = dist.clone();
    for k in 0..n {
        for i in 0..n {
            let dik = path[(i, k)];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let candidate = dik + path[(k, j)];
                if candidate < path[(i, j)] {
                    path[(i, j)] = candidate;
                }
            }
        }
    }
    // Known entries keep their measured value even when a shorter detour exists.
    for (i, j, _) in obs.known() {
        path[(i, j)] = dist[(i, j)];
        path[(j, i)] = dist[(j, i)];
    }
    Ok(path)
}

/// MDS-MAP: shortest-path completion, squaring, then classical MDS.
pub fn mds_map(obs: &ObservedMatrix, dim: usize) -> Result<MdsEmbedding> {
    let d = shortest_path_complete(obs)?;
    mds_localize(&d.map(|v| v * v), dim)
}
