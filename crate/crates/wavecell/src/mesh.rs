//! Spatial meshes for the finite-volume scheme: equidistant grids,
//! jump-adapted grids whose interfaces contain every coefficient
//! discontinuity, and wave-cell refinement of the cells next to those
//! discontinuities.
//!
//! Wave-cell refinement shrinks each discontinuity-adjacent cell into the
//! band `[min_h, 2·min_h)` without ever creating a cell below the input
//! mesh's minimal step, so the CFL-admissible time step is unchanged.

use crate::{Error, Result};

/// Uniform interfaces closer than this fraction of the target cell size to an
/// inserted jump point are removed, so jump insertion cannot create
/// arbitrarily small cells.
const NEAR_DUPLICATE_FRACTION: f64 = 0.1;

/// A 1D cell decomposition with flagged discontinuity interfaces.
#[derive(Debug, Clone)]
pub struct Mesh {
    interfaces: Vec<f64>,
    cell_sizes: Vec<f64>,
    /// Sorted interface indices that coincide with coefficient jumps.
    flagged: Vec<usize>,
    min_h: f64,
    max_h: f64,
}

impl Mesh {
    fn from_interfaces(interfaces: Vec<f64>, flagged: Vec<usize>) -> Result<Self> {
        if interfaces.len() < 2 {
            return Err(Error::InvalidParameter(
                "mesh needs at least two interfaces".into(),
            ));
        }
        let mut cell_sizes = Vec::with_capacity(interfaces.len() - 1);
        let mut min_h = f64::INFINITY;
        let mut max_h: f64 = 0.0;
        for w in interfaces.windows(2) {
            let h = w[1] - w[0];
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "interfaces not strictly increasing near x = {}",
                    w[0]
                )));
            }
            min_h = min_h.min(h);
            max_h = max_h.max(h);
            cell_sizes.push(h);
        }
        for &f in &flagged {
            if f == 0 || f >= interfaces.len() - 1 {
                return Err(Error::InvalidParameter(format!(
                    "flagged interface index {f} is not interior"
                )));
            }
        }
        Ok(Self {
            interfaces,
            cell_sizes,
            flagged,
            min_h,
            max_h,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.cell_sizes.len()
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    pub fn cell_sizes(&self) -> &[f64] {
        &self.cell_sizes
    }

    pub fn cell_size(&self, i: usize) -> f64 {
        self.cell_sizes[i]
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        0.5 * (self.interfaces[i] + self.interfaces[i + 1])
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|i| self.cell_center(i)).collect()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.interfaces[0], *self.interfaces.last().unwrap())
    }

    pub fn domain_length(&self) -> f64 {
        let (l, r) = self.domain();
        r - l
    }

    pub fn min_h(&self) -> f64 {
        self.min_h
    }

    pub fn max_h(&self) -> f64 {
        self.max_h
    }

    /// Indices of interfaces flagged as coefficient discontinuities.
    pub fn flagged_interfaces(&self) -> &[usize] {
        &self.flagged
    }
}

/// Uniform mesh with `n_cells` cells; no flagged interfaces.
pub fn build_equidistant(domain: (f64, f64), n_cells: usize) -> Result<Mesh> {
    if n_cells == 0 {
        return Err(Error::InvalidParameter("n_cells must be positive".into()));
    }
    if !(domain.1 > domain.0) {
        return Err(Error::InvalidParameter(
            "domain must have positive length".into(),
        ));
    }
    let h = (domain.1 - domain.0) / n_cells as f64;
    let mut interfaces: Vec<f64> = (0..n_cells).map(|i| domain.0 + i as f64 * h).collect();
    interfaces.push(domain.1);
    Mesh::from_interfaces(interfaces, Vec::new())
}

/// Start from the equidistant grid with `n_target` cells, insert every jump
/// point as an interface and flag it, dropping uniform interfaces that would
/// leave a cell smaller than a tenth of the target size next to a jump.
pub fn build_jump_adapted(domain: (f64, f64), n_target: usize, jumps: &[f64]) -> Result<Mesh> {
    if n_target == 0 {
        return Err(Error::InvalidParameter("n_target must be positive".into()));
    }
    for w in jumps.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParameter(format!(
                "jump points must be sorted and distinct, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    for &d in jumps {
        if !(d > domain.0 && d < domain.1) {
            return Err(Error::InvalidParameter(format!(
                "jump point {d} outside the open domain ({}, {})",
                domain.0, domain.1
            )));
        }
    }
    let h = (domain.1 - domain.0) / n_target as f64;
    let tol = NEAR_DUPLICATE_FRACTION * h;

    let mut interfaces: Vec<f64> = Vec::with_capacity(n_target + 1 + jumps.len());
    interfaces.push(domain.0);
    for i in 1..n_target {
        let x = domain.0 + i as f64 * h;
        if jumps.iter().all(|&d| (d - x).abs() >= tol) {
            interfaces.push(x);
        }
    }
    interfaces.push(domain.1);

    let mut flagged_pos: Vec<f64> = Vec::with_capacity(jumps.len());
    for &d in jumps {
        // A jump exactly on a surviving uniform interface is only flagged.
        match interfaces.binary_search_by(|x| x.total_cmp(&d)) {
            Ok(_) => {}
            Err(pos) => interfaces.insert(pos, d),
        }
        flagged_pos.push(d);
    }

    let flagged = flagged_pos
        .iter()
        .map(|d| {
            interfaces
                .binary_search_by(|x| x.total_cmp(d))
                .expect("jump point was inserted")
        })
        .collect();
    Mesh::from_interfaces(interfaces, flagged)
}

/// Split every discontinuity-adjacent cell of size at least `2·min_h` so the
/// piece touching the discontinuity lands in `[min_h, 2·min_h)`; `min_h` is
/// taken from the input mesh and never decreases.
pub fn refine_wave_cells(mesh: &Mesh) -> Mesh {
    if mesh.flagged_interfaces().is_empty() {
        return mesh.clone();
    }
    let min_h = mesh.min_h();
    let upper = 2.0 * min_h * (1.0 - 1e-9);
    let flagged_pos: Vec<f64> = mesh
        .flagged_interfaces()
        .iter()
        .map(|&i| mesh.interfaces()[i])
        .collect();

    let mut interfaces: Vec<f64> = mesh.interfaces().to_vec();
    let insert = |interfaces: &mut Vec<f64>, x: f64| {
        if let Err(pos) = interfaces.binary_search_by(|y| y.total_cmp(&x)) {
            interfaces.insert(pos, x);
        }
    };

    for &d in &flagged_pos {
        let idx = interfaces
            .binary_search_by(|y| y.total_cmp(&d))
            .expect("flagged interface present");
        // Read both neighbours before mutating: insertions shift indices.
        let left = (idx > 0).then(|| interfaces[idx - 1]);
        let right = (idx + 1 < interfaces.len()).then(|| interfaces[idx + 1]);
        if let Some(l) = left {
            let w = d - l;
            if w >= 2.0 * min_h {
                let s = (w / 2.0).clamp(min_h, upper);
                insert(&mut interfaces, d - s);
            }
        }
        if let Some(r) = right {
            let w = r - d;
            if w >= 2.0 * min_h {
                let s = (w / 2.0).clamp(min_h, upper);
                insert(&mut interfaces, d + s);
            }
        }
    }

    let flagged = flagged_pos
        .iter()
        .map(|d| {
            interfaces
                .binary_search_by(|y| y.total_cmp(d))
                .expect("flagged interface survives refinement")
        })
        .collect();
    Mesh::from_interfaces(interfaces, flagged).expect("refinement preserves a valid mesh")
}

/// Uniform time grid with the final step clamped to land exactly on `t_end`.
pub fn build_time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "t_end and dt must be positive, got t_end = {t_end}, dt = {dt}"
        )));
    }
    let mut times = vec![0.0];
    let mut t = dt;
    while t < t_end - 1e-12 * t_end.max(1.0) {
        times.push(t);
        t += dt;
    }
    times.push(t_end);
    Ok(times)
}
