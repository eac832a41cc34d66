use crate::error::{Error, Result};
use crate::model::{Compartment, MAX_DIM};
use crate::particle::state::{fingerprint_f64, fingerprint_indices, PopulationState};

#[derive(Debug, Clone, PartialEq)]
enum Membership {
    All,
    Compartment { label: Compartment, fingerprint: u64, count: usize },
}

/// Uniform grid of cells with edge at least the interaction radius.
///
/// Members of each cell are stored in ascending index order (CSR layout), so a
/// merge over the neighboring cells visits candidates in ascending order.
#[derive(Debug, Clone)]
pub struct CellIndex {
    dim: usize,
    lo: [f64; MAX_DIM],
    edge: f64,
    shape: [usize; MAX_DIM],
    cell_start: Vec<u32>,
    members: Vec<u32>,
    n_points: usize,
    fingerprint: u64,
    membership: Membership,
}

/// Upper bound on the number of cells relative to the point count.
const CELLS_PER_POINT: usize = 4;

impl CellIndex {
    fn build(positions: &[f64], dim: usize, support_radius: f64, member: impl Fn(usize) -> bool, membership: Membership) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM, "cell index supports 1 to {MAX_DIM} dimensions");
        assert!(support_radius > 0.0, "support radius must be positive");
        let n = positions.len() / dim;
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for ax in 0..dim {
            lo[ax] = f64::INFINITY;
            hi[ax] = f64::NEG_INFINITY;
        }
        for x in positions.chunks(dim) {
            for ax in 0..dim {
                lo[ax] = lo[ax].min(x[ax]);
                hi[ax] = hi[ax].max(x[ax]);
            }
        }
        if n == 0 {
            lo = [0.0; MAX_DIM];
            hi = [0.0; MAX_DIM];
        }
        let max_cells = (CELLS_PER_POINT * n).max(64);
        let mut edge = support_radius;
        let mut shape = [1usize; MAX_DIM];
        loop {
            let mut total = 1usize;
            for ax in 0..dim {
                let span = hi[ax] - lo[ax];
                shape[ax] = ((span / edge).floor() as usize + 1).max(1);
                total = total.saturating_mul(shape[ax]);
            }
            if total <= max_cells {
                break;
            }
            edge *= 1.5;
        }
        let n_cells: usize = shape[..dim].iter().product();
        let mut cell_of = Vec::with_capacity(n);
        let mut counts = vec![0u32; n_cells + 1];
        for i in 0..n {
            if member(i) {
                let c = Self::cell_id_of(&positions[i * dim..(i + 1) * dim], dim, &lo, edge, &shape);
                cell_of.push((i, c));
                counts[c + 1] += 1;
            }
        }
        for c in 0..n_cells {
            counts[c + 1] += counts[c];
        }
        let cell_start = counts.clone();
        let mut fill = counts;
        let mut members = vec![0u32; cell_of.len()];
        for (i, c) in cell_of {
            members[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        CellIndex {
            dim,
            lo,
            edge,
            shape,
            cell_start,
            members,
            n_points: n,
            fingerprint: fingerprint_f64(positions),
            membership,
        }
    }

    fn cell_coord(v: f64, lo: f64, edge: f64, extent: usize) -> usize {
        let c = ((v - lo) / edge).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(extent - 1)
        }
    }

    fn cell_id_of(x: &[f64], dim: usize, lo: &[f64; MAX_DIM], edge: f64, shape: &[usize; MAX_DIM]) -> usize {
        let mut id = 0;
        for ax in 0..dim {
            id = id * shape[ax] + Self::cell_coord(x[ax], lo[ax], edge, shape[ax]);
        }
        id
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn n_cells(&self) -> usize {
        self.shape[..self.dim].iter().product()
    }

    pub fn n_members(&self) -> usize {
        self.members.len()
    }

    /// Members of cell `c`, ascending.
    pub fn cell_members(&self, c: usize) -> &[u32] {
        &self.members[self.cell_start[c] as usize..self.cell_start[c + 1] as usize]
    }

    /// Appends to `out`, in ascending order, every member in the cell of `x`
    /// and its adjacent cells. Any member within the support radius of `x` is included.
    pub fn neighbor_candidates(&self, x: &[f64], out: &mut Vec<u32>) {
        out.clear();
        let d = self.dim;
        let mut base = [0i64; MAX_DIM];
        for ax in 0..d {
            base[ax] = ((x[ax] - self.lo[ax]) / self.edge).floor() as i64;
        }
        let mut lists: [&[u32]; 27] = [&[]; 27];
        let mut n_lists = 0;
        let mut offsets = [0i64; MAX_DIM];
        let combos = 3usize.pow(d as u32);
        'combo: for k in 0..combos {
            let mut rem = k;
            for ax in 0..d {
                offsets[ax] = (rem % 3) as i64 - 1;
                rem /= 3;
            }
            let mut id = 0usize;
            for ax in 0..d {
                let c = base[ax] + offsets[ax];
                if c < 0 || c >= self.shape[ax] as i64 {
                    continue 'combo;
                }
                id = id * self.shape[ax] + c as usize;
            }
            let m = self.cell_members(id);
            if !m.is_empty() {
                lists[n_lists] = m;
                n_lists += 1;
            }
        }
        merge_sorted(&mut lists[..n_lists], out);
    }

    /// Confirms the index was built from the current positions and, for
    /// compartment indexes, the current compartment membership.
    pub fn check_fresh(&self, state: &PopulationState) -> Result<()> {
        if state.len() != self.n_points || state.dim != self.dim {
            return Err(Error::StaleIndex(format!(
                "index built for {} points in {} dimensions, state has {} in {}",
                self.n_points,
                self.dim,
                state.len(),
                state.dim
            )));
        }
        if state.position_fingerprint() != self.fingerprint {
            return Err(Error::StaleIndex("positions changed since the index was built".into()));
        }
        if let Membership::Compartment { label, fingerprint, count } = &self.membership {
            let current = state.labels.iter().filter(|&&l| l == *label).count();
            let fp = fingerprint_indices((0..state.len()).filter(|&i| state.labels[i] == *label));
            if current != *count || fp != *fingerprint {
                return Err(Error::StaleIndex(format!("membership of compartment {label} changed")));
            }
        }
        Ok(())
    }

    pub(crate) fn restricted_to(&self) -> Option<Compartment> {
        match self.membership {
            Membership::All => None,
            Membership::Compartment { label, .. } => Some(label),
        }
    }
}

/// K-way merge of ascending lists into `out`.
fn merge_sorted(lists: &mut [&[u32]], out: &mut Vec<u32>) {
    match lists.len() {
        0 => {}
        1 => out.extend_from_slice(lists[0]),
        _ => {
            let total: usize = lists.iter().map(|l| l.len()).sum();
            out.reserve(total);
            let mut heads: Vec<usize> = vec![0; lists.len()];
            for _ in 0..total {
                let mut best = usize::MAX;
                let mut best_val = u32::MAX;
                for (k, l) in lists.iter().enumerate() {
                    if heads[k] < l.len() && l[heads[k]] < best_val {
                        best_val = l[heads[k]];
                        best = k;
                    }
                }
                out.push(best_val);
                heads[best] += 1;
            }
        }
    }
}

/// Index over all points of a flat `N×d` position array.
pub fn build_cell_index(positions: &[f64], dim: usize, support_radius: f64) -> CellIndex {
    CellIndex::build(positions, dim, support_radius, |_| true, Membership::All)
}

/// Index over the members of one compartment; the box spans all points so
/// queries from any individual are valid.
pub fn build_compartment_index(state: &PopulationState, label: Compartment, support_radius: f64) -> CellIndex {
    let count = state.count(label);
    let fingerprint = fingerprint_indices((0..state.len()).filter(|&i| state.labels[i] == label));
    CellIndex::build(
        &state.positions,
        state.dim,
        support_radius,
        |i| state.labels[i] == label,
        Membership::Compartment { label, fingerprint, count },
    )
}
