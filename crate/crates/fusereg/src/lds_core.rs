//! Linear dynamical system types, the hierarchical sensor map, trajectory
//! containers with CSV interchange, and seeded simulators.
//!
//! The model throughout is
//! `x_t = F x_{t-1} + delta_t` with `delta_t ~ N(0, Q)` and
//! `z_t = H x_t + epsilon_t` with `epsilon_t ~ N(0, R)`,
//! for a `k`-dimensional state observed through `d` sensors.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sample_mvn_zero;

/// Relative eigenvalue slack below zero still accepted as semidefinite.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Smallest-to-largest singular value ratio below which `H` is reported rank
/// deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Time-invariant linear dynamical system `(F, H, Q, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl LinearSystem {
    /// Builds a system after checking that the matrix shapes are mutually
    /// consistent. Numeric soundness (definiteness, rank) is reported by
    /// [`LinearSystem::validate`] instead of enforced here.
    pub fn new(f: DMatrix<f64>, h: DMatrix<f64>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let k = f.nrows();
        if f.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "F must be square, got {}x{}",
                f.nrows(),
                f.ncols()
            )));
        }
        if h.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "H has {} columns but the state dimension is {}",
                h.ncols(),
                k
            )));
        }
        if q.shape() != (k, k) {
            return Err(Error::DimensionMismatch(format!(
                "Q must be {}x{}, got {}x{}",
                k,
                k,
                q.nrows(),
                q.ncols()
            )));
        }
        let d = h.nrows();
        if r.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "R must be {}x{}, got {}x{}",
                d,
                d,
                r.nrows(),
                r.ncols()
            )));
        }
        Ok(LinearSystem { f, h, q, r })
    }

    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn sensor_dim(&self) -> usize {
        self.h.nrows()
    }

    /// Checks the numeric invariants and reports every finding. Never fails;
    /// callers that need a hard error use [`ValidationReport::is_ok`].
    pub fn validate(&self) -> ValidationReport {
        let mut problems = Vec::new();
        for (name, m) in [
            ("F", &self.f),
            ("H", &self.h),
            ("Q", &self.q),
            ("R", &self.r),
        ] {
            if m.iter().any(|v| !v.is_finite()) {
                problems.push(format!("{name} contains non-finite entries"));
            }
        }
        check_psd("Q", &self.q, &mut problems);
        check_psd("R", &self.r, &mut problems);

        let svs = self.h.clone().singular_values();
        let largest = svs.iter().cloned().fold(0.0, f64::max);
        let smallest = svs.iter().cloned().fold(f64::INFINITY, f64::min);
        if self.h.nrows() < self.h.ncols() || smallest <= RANK_TOLERANCE * largest {
            problems.push(format!(
                "H is rank deficient (singular values {:.3e} .. {:.3e})",
                smallest, largest
            ));
        }
        ValidationReport { problems }
    }
}

fn check_psd(name: &str, m: &DMatrix<f64>, problems: &mut Vec<String>) {
    if m.nrows() != m.ncols() {
        problems.push(format!("{name} is not square"));
        return;
    }
    let scale = 1.0 + m.abs().max();
    let asym = (m - m.transpose()).abs().max();
    if asym > PSD_TOLERANCE * scale {
        problems.push(format!(
            "{name} is not symmetric (max asymmetry {asym:.3e})"
        ));
        return;
    }
    let eigs = m.clone().symmetric_eigenvalues();
    let max_eig = eigs.iter().cloned().fold(0.0, f64::max);
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOLERANCE * max_eig.max(1.0) {
        problems.push(format!("{name} has negative eigenvalue {min_eig:.3e}"));
    }
}

/// Findings from [`LinearSystem::validate`]; empty means the system is usable.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// State or measurement map `R^k -> R^m` for the nonlinear model.
pub type StateFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Jacobian of a [`StateFn`] evaluated at a point.
pub type JacobianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Nonlinear system `x_t = f(x_{t-1}) + delta_t`, `z_t = h(x_t) + epsilon_t`
/// with caller-supplied Jacobians `Df` and `Dh`.
#[derive(Clone)]
pub struct NonlinearSystem {
    pub f: StateFn,
    pub f_jacobian: JacobianFn,
    pub h: StateFn,
    pub h_jacobian: JacobianFn,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl NonlinearSystem {
    pub fn new(
        f: StateFn,
        f_jacobian: JacobianFn,
        h: StateFn,
        h_jacobian: JacobianFn,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        if q.nrows() != q.ncols() {
            return Err(Error::DimensionMismatch("Q must be square".into()));
        }
        if r.nrows() != r.ncols() {
            return Err(Error::DimensionMismatch("R must be square".into()));
        }
        Ok(NonlinearSystem {
            f,
            f_jacobian,
            h,
            h_jacobian,
            q,
            r,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn sensor_dim(&self) -> usize {
        self.r.nrows()
    }

    /// Largest relative disagreement between the supplied Jacobians and
    /// central finite differences over the probe points. Tests hold this
    /// below `1e-5`.
    pub fn jacobian_deviation(&self, probes: &[DVector<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for x in probes {
            worst = worst.max(jacobian_gap(&*self.f, &(self.f_jacobian)(x), x));
            worst = worst.max(jacobian_gap(&*self.h, &(self.h_jacobian)(x), x));
        }
        worst
    }
}

fn jacobian_gap(
    map: &(dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync),
    analytic: &DMatrix<f64>,
    x: &DVector<f64>,
) -> f64 {
    let mut fd = DMatrix::zeros(analytic.nrows(), analytic.ncols());
    for j in 0..x.len() {
        let step = 1e-6 * (1.0 + x[j].abs());
        let mut hi = x.clone();
        let mut lo = x.clone();
        hi[j] += step;
        lo[j] -= step;
        let col = (map(&hi) - map(&lo)) / (2.0 * step);
        fd.set_column(j, &col);
    }
    (&fd - analytic).abs().max() / (1.0 + analytic.abs().max())
}

/// Opaque handle to a region node inside a [`SensorHierarchy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
struct RegionData {
    name: String,
    population: Option<f64>,
    children: Vec<usize>,
}

/// A tree of geographic regions with populations, plus an ordered list of
/// sensor attachments. Leaf regions are the states being estimated; internal
/// regions aggregate their children by population share.
#[derive(Debug, Clone)]
pub struct SensorHierarchy {
    nodes: Vec<RegionData>,
    attachments: Vec<usize>,
}

/// JSON shape for hierarchy interchange: nested regions with an optional
/// population, children, and a count of sensors attached at the node.
/// Sensors load in depth-first order, a node's own before its children's.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionNode {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<RegionNode>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sensors: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl SensorHierarchy {
    /// Starts a hierarchy from a root region. Leaf populations are required;
    /// internal populations may be omitted and are derived from children.
    pub fn new(root_name: &str, population: Option<f64>) -> Self {
        SensorHierarchy {
            nodes: vec![RegionData {
                name: root_name.to_string(),
                population,
                children: Vec::new(),
            }],
            attachments: Vec::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn add_region(&mut self, parent: NodeId, name: &str, population: Option<f64>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(RegionData {
            name: name.to_string(),
            population,
            children: Vec::new(),
        });
        self.nodes[parent.0].children.push(id);
        NodeId(id)
    }

    /// Attaches one sensor at `node`. Attachment order fixes the row order of
    /// the measurement map.
    pub fn attach_sensor(&mut self, node: NodeId) {
        self.attachments.push(node.0);
    }

    pub fn sensor_count(&self) -> usize {
        self.attachments.len()
    }

    /// Leaf regions in depth-first order; these index the state vector.
    pub fn leaf_names(&self) -> Vec<&str> {
        self.leaves()
            .into_iter()
            .map(|i| self.nodes[i].name.as_str())
            .collect()
    }

    fn leaves(&self) -> Vec<usize> {
        let mut order = Vec::new();
        self.collect_leaves(0, &mut order);
        order
    }

    fn collect_leaves(&self, node: usize, out: &mut Vec<usize>) {
        if self.nodes[node].children.is_empty() {
            out.push(node);
        } else {
            for &c in &self.nodes[node].children {
                self.collect_leaves(c, out);
            }
        }
    }

    fn subtree_leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(node, &mut out);
        out
    }

    /// Effective population of a node: declared for leaves, the sum over
    /// children otherwise. A declared internal population must agree with the
    /// sum to within `1e-9` relative.
    fn population_of(&self, node: usize) -> Result<f64> {
        let data = &self.nodes[node];
        if data.children.is_empty() {
            return match data.population {
                Some(p) if p > 0.0 => Ok(p),
                Some(p) => Err(Error::InvalidHierarchy(format!(
                    "leaf '{}' has nonpositive population {p}",
                    data.name
                ))),
                None => Err(Error::InvalidHierarchy(format!(
                    "leaf '{}' has no population",
                    data.name
                ))),
            };
        }
        let mut sum = 0.0;
        for &c in &data.children {
            sum += self.population_of(c)?;
        }
        if let Some(p) = data.population {
            if (p - sum).abs() > 1e-9 * p.abs().max(sum.abs()) {
                return Err(Error::InvalidHierarchy(format!(
                    "region '{}' declares population {p} but its children sum to {sum}",
                    data.name
                )));
            }
        }
        Ok(sum)
    }

    /// Builds the measurement map `H` (sensors x leaves). The row for a
    /// sensor attached at region `n` holds `pop(leaf)/pop(n)` for each leaf
    /// under `n` and zero elsewhere, so rows are nonnegative and sum to one.
    pub fn measurement_map(&self) -> Result<DMatrix<f64>> {
        let leaves = self.leaves();
        if leaves.is_empty() {
            return Err(Error::EmptyHierarchy);
        }
        if self.attachments.is_empty() {
            return Err(Error::NoSensors);
        }
        let col_of = |node: usize| leaves.iter().position(|&l| l == node).unwrap();
        let mut h = DMatrix::zeros(self.attachments.len(), leaves.len());
        for (row, &node) in self.attachments.iter().enumerate() {
            let pop_n = self.population_of(node)?;
            for leaf in self.subtree_leaves(node) {
                let pop_l = self.population_of(leaf)?;
                h[(row, col_of(leaf))] = pop_l / pop_n;
            }
        }
        Ok(h)
    }

    /// Serializes to the nested-region JSON schema.
    pub fn to_json_string(&self) -> String {
        let node = self.to_region_node(0);
        serde_json::to_string_pretty(&node).expect("hierarchy serialization cannot fail")
    }

    fn to_region_node(&self, idx: usize) -> RegionNode {
        RegionNode {
            name: self.nodes[idx].name.clone(),
            population: self.nodes[idx].population,
            children: self.nodes[idx]
                .children
                .iter()
                .map(|&c| self.to_region_node(c))
                .collect(),
            sensors: self.attachments.iter().filter(|&&a| a == idx).count(),
        }
    }

    /// Parses the nested-region JSON schema. Sensor rows are ordered
    /// depth-first, a node's own sensors before its children's.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let root: RegionNode = serde_json::from_str(json)
            .map_err(|e| Error::Schema(format!("hierarchy JSON: {e}")))?;
        let mut hier = SensorHierarchy {
            nodes: Vec::new(),
            attachments: Vec::new(),
        };
        hier.absorb(&root, None);
        Ok(hier)
    }

    fn absorb(&mut self, node: &RegionNode, parent: Option<usize>) {
        let id = self.nodes.len();
        self.nodes.push(RegionData {
            name: node.name.clone(),
            population: node.population,
            children: Vec::new(),
        });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        for _ in 0..node.sensors {
            self.attachments.push(id);
        }
        for child in &node.children {
            self.absorb(child, Some(id));
        }
    }

    /// The two-region, five-state demo hierarchy: equal unit populations,
    /// one sensor per state, one per region, and one national sensor, in that
    /// row order. Its measurement map is 8x5.
    pub fn two_region_demo() -> SensorHierarchy {
        let mut hier = SensorHierarchy::new("national", None);
        let root = hier.root();
        let region_a = hier.add_region(root, "region-a", None);
        let region_b = hier.add_region(root, "region-b", None);
        let mut states = Vec::new();
        for i in 1..=3 {
            states.push(hier.add_region(region_a, &format!("state-{i}"), Some(1.0)));
        }
        for i in 4..=5 {
            states.push(hier.add_region(region_b, &format!("state-{i}"), Some(1.0)));
        }
        for s in states {
            hier.attach_sensor(s);
        }
        hier.attach_sensor(region_a);
        hier.attach_sensor(region_b);
        hier.attach_sensor(root);
        hier
    }
}

/// A simulated or ingested run: states `X` (t x k), measurements `Z` (t x d),
/// optional per-sensor source covariates `U`, and an observation mask for `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: DMatrix<f64>,
    pub measurements: DMatrix<f64>,
    pub sources: Option<DMatrix<f64>>,
    pub observed: DMatrix<bool>,
}

impl Trajectory {
    pub fn new(
        states: DMatrix<f64>,
        measurements: DMatrix<f64>,
        sources: Option<DMatrix<f64>>,
        observed: DMatrix<bool>,
    ) -> Result<Self> {
        let t = states.nrows();
        if measurements.nrows() != t || observed.nrows() != t {
            return Err(Error::DimensionMismatch(
                "states, measurements, and mask must have the same number of rows".into(),
            ));
        }
        if observed.ncols() != measurements.ncols() {
            return Err(Error::DimensionMismatch(
                "mask must have one column per sensor".into(),
            ));
        }
        if let Some(u) = &sources {
            if u.nrows() != t || u.ncols() != measurements.ncols() {
                return Err(Error::DimensionMismatch(
                    "sources must be t x d like the measurements".into(),
                ));
            }
        }
        Ok(Trajectory {
            states,
            measurements,
            sources,
            observed,
        })
    }

    /// Fully observed trajectory without source covariates.
    pub fn fully_observed(states: DMatrix<f64>, measurements: DMatrix<f64>) -> Result<Self> {
        let mask = DMatrix::from_element(measurements.nrows(), measurements.ncols(), true);
        Trajectory::new(states, measurements, None, mask)
    }

    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_dim(&self) -> usize {
        self.states.ncols()
    }

    pub fn sensor_dim(&self) -> usize {
        self.measurements.ncols()
    }

    /// Writes the `t, x_*, z_*, obs_*` CSV schema.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let (k, d) = (self.state_dim(), self.sensor_dim());
        let mut out = String::from("t");
        for j in 1..=k {
            let _ = write!(out, ",x_{j}");
        }
        for j in 1..=d {
            let _ = write!(out, ",z_{j}");
        }
        for j in 1..=d {
            let _ = write!(out, ",obs_{j}");
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{}", i + 1);
            for j in 0..k {
                let _ = write!(out, ",{}", self.states[(i, j)]);
            }
            for j in 0..d {
                let _ = write!(out, ",{}", self.measurements[(i, j)]);
            }
            for j in 0..d {
                let _ = write!(out, ",{}", u8::from(self.observed[(i, j)]));
            }
            out.push('\n');
        }
        out
    }

    /// Reads the `t, x_*, z_*, obs_*` CSV schema. Line numbers in errors are
    /// 1-based and count the header.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Trajectory::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Schema("empty file".into()))?;
        let names: Vec<&str> = header.split(',').map(str::trim).collect();
        if names.first() != Some(&"t") {
            return Err(Error::Schema("first column must be 't'".into()));
        }
        let count_prefix = |prefix: &str| {
            names
                .iter()
                .filter(|n| n.starts_with(prefix) && n[prefix.len()..].parse::<usize>().is_ok())
                .count()
        };
        let k = count_prefix("x_");
        let d = count_prefix("z_");
        let d_obs = count_prefix("obs_");
        if k == 0 || d == 0 {
            return Err(Error::Schema(
                "need at least one x_* and one z_* column".into(),
            ));
        }
        let mut expected = vec!["t".to_string()];
        expected.extend((1..=k).map(|j| format!("x_{j}")));
        expected.extend((1..=d).map(|j| format!("z_{j}")));
        expected.extend((1..=d.max(d_obs)).map(|j| format!("obs_{j}")));
        let missing: Vec<String> = expected
            .iter()
            .filter(|e| !names.contains(&e.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!(
                "missing columns: {}",
                missing.join(", ")
            )));
        }
        if names.len() != expected.len() {
            return Err(Error::Schema(format!(
                "expected {} columns, found {}",
                expected.len(),
                names.len()
            )));
        }
        if names[1..] != expected[1..].iter().map(String::as_str).collect::<Vec<_>>()[..] {
            return Err(Error::Schema(
                "columns must be ordered t, x_*, z_*, obs_*".into(),
            ));
        }

        let mut states_rows = Vec::new();
        let mut meas_rows = Vec::new();
        let mut mask_rows = Vec::new();
        for (offset, line) in lines.enumerate() {
            let line_no = offset + 2;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} cells, found {}", names.len(), cells.len()),
                });
            }
            cells[0].parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("time index '{}' is not an integer", cells[0]),
            })?;
            let parse_f64 = |cell: &str, what: &str| -> Result<f64> {
                cell.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("{what} '{cell}' is not a number"),
                })
            };
            let mut xrow = Vec::with_capacity(k);
            for j in 0..k {
                let v = parse_f64(cells[1 + j], "state")?;
                if v.is_nan() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("state x_{} is NaN", j + 1),
                    });
                }
                xrow.push(v);
            }
            let mut zrow = Vec::with_capacity(d);
            for j in 0..d {
                zrow.push(parse_f64(cells[1 + k + j], "measurement")?);
            }
            let mut mrow = Vec::with_capacity(d);
            for j in 0..d {
                let cell = cells[1 + k + d + j];
                match cell {
                    "0" => mrow.push(false),
                    "1" => mrow.push(true),
                    _ => {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("observation flag '{cell}' must be 0 or 1"),
                        })
                    }
                }
            }
            states_rows.push(xrow);
            meas_rows.push(zrow);
            mask_rows.push(mrow);
        }
        let t = states_rows.len();
        let states = DMatrix::from_fn(t, k, |i, j| states_rows[i][j]);
        let measurements = DMatrix::from_fn(t, d, |i, j| meas_rows[i][j]);
        let observed = DMatrix::from_fn(t, d, |i, j| mask_rows[i][j]);
        Trajectory::new(states, measurements, None, observed)
    }
}

/// Simulates `steps` transitions of a validated system from `x0`, drawing
/// process and measurement noise from a seeded generator. Row `i` of the
/// result holds `x_{i+1}` and `z_{i+1}`; the initial state is not stored.
pub fn simulate_lds(
    sys: &LinearSystem,
    x0: &DVector<f64>,
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    let report = sys.validate();
    if !report.is_ok() {
        return Err(Error::InvalidSystem(report.problems));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has length {} but the state dimension is {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, d) = (sys.state_dim(), sys.sensor_dim());
    let mut states = DMatrix::zeros(steps, k);
    let mut measurements = DMatrix::zeros(steps, d);
    let mut x = x0.clone();
    for i in 0..steps {
        x = &sys.f * &x + sample_mvn_zero(&mut rng, &sys.q);
        let z = &sys.h * &x + sample_mvn_zero(&mut rng, &sys.r);
        states.row_mut(i).copy_from(&x.transpose());
        measurements.row_mut(i).copy_from(&z.transpose());
    }
    Trajectory::fully_observed(states, measurements)
}

/// Autoregressive pull of the forced scalar demo process.
pub const FORCED_AR_COEFFICIENT: f64 = 0.5;
/// Amplitude of the sinusoidal forcing term.
pub const FORCING_AMPLITUDE: f64 = 0.05;
/// Angular frequency of the forcing term (also handed to the sine and cosine
/// candidate sensors).
pub const FORCING_FREQUENCY: f64 = 0.126;
/// Length of the demo trajectory.
pub const FORCED_AR_STEPS: usize = 200;
/// Number of identical unit-noise sensors observing the demo state.
pub const FORCED_AR_SENSORS: usize = 4;

/// Simulates the scalar demo process
/// `x_t = 0.5 x_{t-1} + 0.05 sin(0.126 t) + delta_t` from `x_0 = 1`, observed
/// by four sensors `z_t = x_t 1 + epsilon_t`, with `delta_t ~ N(0, 0.01)` and
/// `epsilon_t ~ N(0, I)`, over 200 steps.
pub fn simulate_forced_ar(seed: u64) -> Trajectory {
    simulate_forced_ar_with(seed, 0.1, 1.0)
}

/// Same generator with adjustable noise levels; zero makes it deterministic.
pub fn simulate_forced_ar_with(seed: u64, process_sd: f64, measurement_sd: f64) -> Trajectory {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = DMatrix::zeros(FORCED_AR_STEPS, 1);
    let mut measurements = DMatrix::zeros(FORCED_AR_STEPS, FORCED_AR_SENSORS);
    let mut x = 1.0;
    for i in 0..FORCED_AR_STEPS {
        let t = (i + 1) as f64;
        let noise: f64 = rng.sample(StandardNormal);
        x = FORCED_AR_COEFFICIENT * x
            + FORCING_AMPLITUDE * (FORCING_FREQUENCY * t).sin()
            + process_sd * noise;
        states[(i, 0)] = x;
        for j in 0..FORCED_AR_SENSORS {
            let eps: f64 = rng.sample(StandardNormal);
            measurements[(i, j)] = x + measurement_sd * eps;
        }
    }
    Trajectory::fully_observed(states, measurements).expect("demo shapes are consistent")
}
