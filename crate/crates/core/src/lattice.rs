//! Patch-lattice adjacency and connected components.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

const OFFSETS_4: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const OFFSETS_8: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &OFFSETS_4,
            Connectivity::Eight => &OFFSETS_8,
        }
    }

    /// Row-major indices adjacent to `idx` on a `grid_h x grid_w` lattice.
    pub fn neighbors(self, idx: usize, grid_h: usize, grid_w: usize) -> impl Iterator<Item = usize> {
        let (r, c) = ((idx / grid_w) as isize, (idx % grid_w) as isize);
        self.offsets().iter().filter_map(move |&(dr, dc)| {
            let (nr, nc) = (r + dr, c + dc);
            (nr >= 0 && nc >= 0 && (nr as usize) < grid_h && (nc as usize) < grid_w)
                .then(|| nr as usize * grid_w + nc as usize)
        })
    }
}

/// Connected component of `seed` within the `allowed` cells, as a membership
/// mask. An unallowed seed yields an empty component.
pub fn component_of(
    allowed: &[bool],
    seed: usize,
    grid_h: usize,
    grid_w: usize,
    connectivity: Connectivity,
) -> Vec<bool> {
    let mut member = vec![false; allowed.len()];
    if !allowed[seed] {
        return member;
    }
    let mut queue = VecDeque::from([seed]);
    member[seed] = true;
    while let Some(idx) = queue.pop_front() {
        for nb in connectivity.neighbors(idx, grid_h, grid_w) {
            if allowed[nb] && !member[nb] {
                member[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    member
}

/// Number of connected components among the `true` cells.
pub fn count_components(cells: &[bool], grid_h: usize, grid_w: usize, connectivity: Connectivity) -> usize {
    let mut seen = vec![false; cells.len()];
    let mut count = 0;
    for start in 0..cells.len() {
        if !cells[start] || seen[start] {
            continue;
        }
        count += 1;
        let comp = component_of(cells, start, grid_h, grid_w, connectivity);
        for (s, m) in seen.iter_mut().zip(comp) {
            *s |= m;
        }
    }
    count
}

/// BFS hop distance from the nearest source cell to every cell reachable
/// through `passable` cells (sources count as passable). Unreached cells get
/// `None`.
pub fn hop_distances(
    sources: &[bool],
    passable: &[bool],
    grid_h: usize,
    grid_w: usize,
    connectivity: Connectivity,
) -> Vec<Option<usize>> {
    let mut dist = vec![None; sources.len()];
    let mut queue = VecDeque::new();
    for (i, &s) in sources.iter().enumerate() {
        if s {
            dist[i] = Some(0);
            queue.push_back(i);
        }
    }
    while let Some(idx) = queue.pop_front() {
        let d = dist[idx].expect("queued cells have a distance");
        for nb in connectivity.neighbors(idx, grid_h, grid_w) {
            if passable[nb] && dist[nb].is_none() {
                dist[nb] = Some(d + 1);
                queue.push_back(nb);
            }
        }
    }
    dist
}
