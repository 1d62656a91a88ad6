//! Social graph: generation, row normalization, multi-hop propagation
//! coefficients and the text serialization used by the CLI.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

/// Directed weighted client graph. Entry `(i, j)` is the influence of client
/// `j` on client `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDigraph {
    weights: DMatrix<f64>,
}

impl WeightedDigraph {
    /// Validates and wraps a dense weight matrix.
    ///
    /// The matrix must be square with at least two clients, have a zero
    /// diagonal, entries in `[0, 1)`, and at least one positive entry per row.
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self> {
        let n = weights.nrows();
        if n < 2 || weights.ncols() != n {
            return Err(Error::param(
                "weights",
                format!("expected a square matrix with n >= 2, got {}x{}", n, weights.ncols()),
            ));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Structural {
                    client: i,
                    reason: format!("self-loop weight {} (diagonal must be zero)", weights[(i, i)]),
                });
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(0.0..1.0).contains(&w) {
                    return Err(Error::Structural {
                        client: i,
                        reason: format!("weight ({i}, {j}) = {w} outside [0, 1)"),
                    });
                }
            }
        }
        check_rows_nonzero(&weights)?;
        Ok(WeightedDigraph { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Number of positive entries.
    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }

    /// Serializes to the `n <count>` / `i j weight` text format.
    ///
    /// Weights are written with the shortest representation that round-trips,
    /// so `parse(to_text(g)) == g` bit for bit.
    pub fn to_text(&self) -> String {
        let n = self.n();
        let mut out = format!("n {n}\n");
        for i in 0..n {
            for j in 0..n {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    let _ = writeln!(out, "{i} {j} {w}");
                }
            }
        }
        out
    }

    /// Parses the text format written by [`WeightedDigraph::to_text`].
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let bad = |line: usize, msg: String| Error::param("graph", format!("line {line}: {msg}"));

        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::param("graph", "empty graph file"))?;
        let n: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", count] => count
                .parse()
                .map_err(|_| bad(hline, format!("bad client count `{count}`")))?,
            _ => return Err(bad(hline, format!("expected `n <count>`, got `{header}`"))),
        };
        if n < 2 {
            return Err(bad(hline, format!("client count {n} < 2")));
        }

        let mut weights = DMatrix::zeros(n, n);
        let mut seen = vec![false; n * n];
        for (k, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [i, j, w] = fields.as_slice() else {
                return Err(bad(k, format!("expected `i j weight`, got `{line}`")));
            };
            let i: usize = i.parse().map_err(|_| bad(k, format!("bad index `{i}`")))?;
            let j: usize = j.parse().map_err(|_| bad(k, format!("bad index `{j}`")))?;
            let w: f64 = w.parse().map_err(|_| bad(k, format!("bad weight `{w}`")))?;
            if i >= n || j >= n {
                return Err(bad(k, format!("index ({i}, {j}) out of range for n = {n}")));
            }
            if std::mem::replace(&mut seen[i * n + j], true) {
                return Err(bad(k, format!("duplicate edge ({i}, {j})")));
            }
            weights[(i, j)] = w;
        }
        WeightedDigraph::from_weights(weights)
    }
}

fn check_rows_nonzero(weights: &DMatrix<f64>) -> Result<()> {
    for (i, row) in weights.row_iter().enumerate() {
        if row.sum() <= 0.0 {
            return Err(Error::Structural {
                client: i,
                reason: "isolated client: row has no positive weight".into(),
            });
        }
    }
    Ok(())
}

/// Parameters of the Erdős–Rényi style generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErParams {
    pub n: usize,
    pub p_low: f64,
    pub p_high: f64,
    pub w_low: f64,
    pub w_high: f64,
}

impl Default for ErParams {
    fn default() -> Self {
        ErParams {
            n: 20,
            p_low: 0.1,
            p_high: 0.9,
            w_low: 0.1,
            w_high: 1.0,
        }
    }
}

impl ErParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", format!("need n >= 2, got {}", self.n)));
        }
        if !(0.0 < self.p_low && self.p_low <= self.p_high && self.p_high <= 1.0) {
            return Err(Error::param(
                "p_range",
                format!("need 0 < p_low <= p_high <= 1, got ({}, {})", self.p_low, self.p_high),
            ));
        }
        if !(0.0 < self.w_low && self.w_low <= self.w_high && self.w_high <= 1.0) {
            return Err(Error::param(
                "w_range",
                format!("need 0 < w_low <= w_high <= 1, got ({}, {})", self.w_low, self.w_high),
            ));
        }
        Ok(())
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Draws a directed graph: each ordered pair gets its own connection
/// probability from `[p_low, p_high]` and, if connected, a weight from
/// `[w_low, w_high]`. Rows left empty get one uniformly chosen in-edge.
pub fn generate_er_graph<R: Rng + ?Sized>(params: &ErParams, rng: &mut R) -> Result<WeightedDigraph> {
    params.validate()?;
    let n = params.n;
    let mut weights = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = uniform(rng, params.p_low, params.p_high);
            if rng.random::<f64>() < p {
                weights[(i, j)] = uniform(rng, params.w_low, params.w_high);
            }
        }
    }
    for i in 0..n {
        if weights.row(i).iter().all(|&w| w == 0.0) {
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            weights[(i, j)] = uniform(rng, params.w_low, params.w_high);
        }
    }
    WeightedDigraph::from_weights(weights)
}

/// Row-stochastic normalization of a [`WeightedDigraph`].
#[derive(Debug, Clone, PartialEq)]
pub struct RowStochasticMatrix {
    entries: DMatrix<f64>,
    floor: f64,
}

impl RowStochasticMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }
}

/// Divides each row by its sum, then lifts positive entries below `w_min` to
/// exactly `w_min`, rescaling the remaining positive entries of the row so it
/// still sums to one. The lift repeats until no unpinned entry is below the
/// floor; `w_min < 1/n` guarantees this terminates with a valid row.
pub fn row_normalize(g: &WeightedDigraph, w_min: f64) -> Result<RowStochasticMatrix> {
    let n = g.n();
    if !(0.0..1.0 / n as f64).contains(&w_min) {
        return Err(Error::param(
            "w_min",
            format!("need 0 <= w_min < 1/n = {}, got {w_min}", 1.0 / n as f64),
        ));
    }
    check_rows_nonzero(g.weights())?;

    let mut entries = g.weights().clone();
    for i in 0..n {
        let sum: f64 = entries.row(i).sum();
        entries.row_mut(i).scale_mut(1.0 / sum);
        if w_min > 0.0 {
            apply_floor(&mut entries, i, w_min);
        }
    }
    Ok(RowStochasticMatrix {
        entries,
        floor: w_min,
    })
}

fn apply_floor(m: &mut DMatrix<f64>, i: usize, w_min: f64) {
    let n = m.ncols();
    let mut pinned = vec![false; n];
    loop {
        let mut changed = false;
        for j in 0..n {
            let w = m[(i, j)];
            if w > 0.0 && !pinned[j] && w < w_min {
                pinned[j] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let pinned_mass = pinned.iter().filter(|&&p| p).count() as f64 * w_min;
        let free_mass: f64 = (0..n).filter(|&j| !pinned[j]).map(|j| m[(i, j)]).sum();
        for j in 0..n {
            if pinned[j] {
                m[(i, j)] = w_min;
            } else {
                m[(i, j)] *= (1.0 - pinned_mass) / free_mass;
            }
        }
    }
}

/// Multi-hop propagation coefficients `σ = Σ_{k=1..K} λ^{k-1} W̃^k` with a
/// zeroed diagonal, and the row-sum bound `S = (1 - λ^K) / (1 - λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationModel {
    lambda: f64,
    hops: usize,
    sigma: DMatrix<f64>,
    bound: f64,
}

impl PropagationModel {
    /// Builds a model from an explicit coefficient matrix. Used for
    /// hand-constructed instances; `σ` must be square, nonnegative, with a
    /// zero diagonal.
    pub fn from_sigma(sigma: DMatrix<f64>, lambda: f64, hops: usize) -> Result<Self> {
        check_decay(lambda, hops)?;
        let n = sigma.nrows();
        if sigma.ncols() != n {
            return Err(Error::param("sigma", "matrix must be square"));
        }
        if sigma.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::param("sigma", "entries must be finite and nonnegative"));
        }
        if (0..n).any(|i| sigma[(i, i)] != 0.0) {
            return Err(Error::param("sigma", "diagonal must be zero"));
        }
        Ok(PropagationModel {
            lambda,
            hops,
            sigma,
            bound: geometric_bound(lambda, hops),
        })
    }

    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// `S = (1 - λ^K) / (1 - λ)`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Largest row sum of `σ`; the actual contraction factor of the
    /// best-response map is `α` times this.
    pub fn max_row_sum(&self) -> f64 {
        self.sigma
            .row_iter()
            .map(|r| r.sum())
            .fold(0.0, f64::max)
    }
}

fn check_decay(lambda: f64, hops: usize) -> Result<()> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", format!("need 0 < λ < 1, got {lambda}")));
    }
    if hops < 1 {
        return Err(Error::param("hops", "need K >= 1"));
    }
    Ok(())
}

fn geometric_bound(lambda: f64, hops: usize) -> f64 {
    (1.0 - lambda.powi(hops as i32)) / (1.0 - lambda)
}

pub fn propagation_coefficients(w: &RowStochasticMatrix, lambda: f64, hops: usize) -> Result<PropagationModel> {
    check_decay(lambda, hops)?;
    let base = w.entries();
    let mut power = base.clone();
    let mut sigma = base.clone();
    let mut decay = 1.0;
    for _ in 2..=hops {
        power = &power * base;
        decay *= lambda;
        sigma += &power * decay;
    }
    sigma.fill_diagonal(0.0);
    Ok(PropagationModel {
        lambda,
        hops,
        sigma,
        bound: geometric_bound(lambda, hops),
    })
}

/// `R_i = Σ_j σ_ij ρ_j`.
pub fn external_risk(model: &PropagationModel, rho: &[f64]) -> Result<Vec<f64>> {
    if rho.len() != model.n() {
        return Err(Error::param(
            "rho",
            format!("length {} does not match client count {}", rho.len(), model.n()),
        ));
    }
    let r = model.sigma() * DVector::from_column_slice(rho);
    Ok(r.iter().copied().collect())
}
