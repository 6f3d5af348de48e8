//! Two-way fixed-effects regressions on the player-month panel.
//!
//! y_it = alpha_i + tau_t + x_it' beta + e_it, estimated either by absorbing
//! both effect sets with alternating projections or by ordinary least
//! squares on explicit indicators. Identification drops the first player
//! and the first month (in sorted order): tau of the first month is 0 and
//! an intercept carries the base level. Standard errors are clustered by
//! player (CR1).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gap::PanelCell;
use crate::month::Month;
use crate::sgf::GroupFlag;
use crate::stats::special::t_cdf;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EconError {
    #[error("rank deficient design: {0}")]
    RankDeficient(String),
    #[error("clustered standard errors need at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("no control players in the estimation sample")]
    NoControlGroup,
    #[error("no treated players in the estimation sample")]
    NoTreatedGroup,
    #[error("no observations in the post period {0}")]
    NoPostPeriod(String),
    #[error("alternating projections did not converge after {0} sweeps")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeMethod {
    /// Alternating projections.
    #[default]
    Absorb,
    /// Explicit indicator columns solved by pivoted QR.
    Dummies,
}

impl std::str::FromStr for FeMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<FeMethod, String> {
        match s {
            "absorb" => Ok(FeMethod::Absorb),
            "dummies" => Ok(FeMethod::Dummies),
            _ => Err(format!("unknown method {s:?} (absorb|dummies)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub method: FeMethod,
    /// Weight cells by their number of matches.
    pub weighted: bool,
}

const PROJECTION_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coef {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauPoint {
    pub month: Month,
    pub tau: f64,
    /// Clustered SE; absent for the base month.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: FeMethod,
    pub weighted: bool,
    /// Slope coefficients other than the fixed effects.
    pub coefficients: Vec<Coef>,
    pub intercept: f64,
    pub base_player: String,
    /// alpha_i minus alpha of the base player.
    pub player_effects: Vec<(String, f64)>,
    pub tau_series: Vec<TauPoint>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    /// (player, month) of each residual.
    #[serde(skip)]
    pub obs: Vec<(String, Month)>,
    pub r2: f64,
    pub adj_r2: f64,
    pub n_obs: usize,
    pub n_players: usize,
    pub n_months: usize,
    /// Parameters counted for the small-sample factor, fixed effects included.
    pub n_params: usize,
    pub cluster_level: String,
    pub n_clusters: usize,
    pub dropped_players: Vec<String>,
    pub notes: Vec<String>,
}

impl RegressionFit {
    pub fn coef(&self, name: &str) -> Option<&Coef> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Significance stars for a two-sided p-value: *, **, *** below 0.1, 0.05,
/// 0.01.
pub fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.01 => "***",
        Some(p) if p < 0.05 => "**",
        Some(p) if p < 0.1 => "*",
        _ => "",
    }
}

/// One regression observation with its extra regressors.
#[derive(Debug, Clone)]
struct Obs {
    player: String,
    month: Month,
    y: f64,
    w: f64,
    x: Vec<f64>,
}

/// Player and month indices for a set of observations, with weighted group
/// sums for demeaning.
struct Groups {
    player: Vec<usize>,
    month: Vec<usize>,
    w: Vec<f64>,
    wp: Vec<f64>,
    wt: Vec<f64>,
}

impl Groups {
    fn new(player: Vec<usize>, month: Vec<usize>, w: Vec<f64>, n_p: usize, n_t: usize) -> Groups {
        let mut wp = vec![0.0; n_p];
        let mut wt = vec![0.0; n_t];
        for k in 0..w.len() {
            wp[player[k]] += w[k];
            wt[month[k]] += w[k];
        }
        Groups { player, month, w, wp, wt }
    }

    fn means(&self, v: &[f64], by_player: bool) -> Vec<f64> {
        let (idx, tot) = if by_player { (&self.player, &self.wp) } else { (&self.month, &self.wt) };
        let mut s = vec![0.0; tot.len()];
        for k in 0..v.len() {
            s[idx[k]] += self.w[k] * v[k];
        }
        s.iter().zip(tot).map(|(a, b)| a / b).collect()
    }

    fn demean_player(&self, v: &mut [f64]) {
        let m = self.means(v, true);
        for k in 0..v.len() {
            v[k] -= m[self.player[k]];
        }
    }

    /// Removes both effect sets by alternating projections.
    fn demean_both(&self, v: &mut [f64]) -> Result<(), EconError> {
        let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for _ in 0..MAX_SWEEPS {
            let mp = self.means(v, true);
            for k in 0..v.len() {
                v[k] -= mp[self.player[k]];
            }
            let mt = self.means(v, false);
            for k in 0..v.len() {
                v[k] -= mt[self.month[k]];
            }
            let shift = mp.iter().chain(&mt).fold(0.0f64, |a, b| a.max(b.abs()));
            if shift <= PROJECTION_TOL * scale {
                return Ok(());
            }
        }
        Err(EconError::NoConvergence(MAX_SWEEPS))
    }

    /// Splits `r`, which must lie in the span of the two effect sets, into
    /// alpha and tau by backfitting.
    fn backfit(&self, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EconError> {
        let scale = r.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        let mut alpha = vec![0.0; self.wp.len()];
        let mut tau = vec![0.0; self.wt.len()];
        let mut work = vec![0.0; r.len()];
        for _ in 0..MAX_SWEEPS {
            for k in 0..r.len() {
                work[k] = r[k] - tau[self.month[k]];
            }
            let a = self.means(&work, true);
            for k in 0..r.len() {
                work[k] = r[k] - a[self.player[k]];
            }
            let t = self.means(&work, false);
            let change = a.iter().zip(&alpha).chain(t.iter().zip(&tau)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            alpha = a;
            tau = t;
            if change <= PROJECTION_TOL * scale {
                return Ok((alpha, tau));
            }
        }
        Err(EconError::NoConvergence(MAX_SWEEPS))
    }
}

/// Least squares by column-pivoted QR. Returns the coefficients and
/// (X'X)^-1.
fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), EconError> {
    let k = x.ncols();
    if x.nrows() < k {
        return Err(EconError::RankDeficient(format!("{} observations for {} parameters", x.nrows(), k)));
    }
    if k == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let r = r.view((0, 0), (k, k)).into_owned();
    let dmax = r.diagonal().iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let tol = 1e-10 * dmax * (x.nrows().max(k) as f64).sqrt();
    if let Some(i) = r.diagonal().iter().position(|d| d.abs() <= tol) {
        return Err(EconError::RankDeficient(format!("column {i} of the pivoted design is collinear")));
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let mut beta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or_else(|| EconError::RankDeficient("singular R".into()))?;
    qr.p().inv_permute_rows(&mut beta);
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| EconError::RankDeficient("singular R".into()))?;
    let mut xtx_inv = &r_inv * r_inv.transpose();
    qr.p().inv_permute_rows(&mut xtx_inv);
    qr.p().inv_permute_columns(&mut xtx_inv);
    Ok((beta, xtx_inv))
}

/// Cluster-robust (CR1) covariance of OLS coefficients on design `x` with
/// residuals `u`. `bread` is (X'X)^-1; `n_params` is the parameter count
/// used in the (N - 1) / (N - K) factor.
pub fn clustered_vcov(
    x: &DMatrix<f64>,
    u: &[f64],
    cluster: &[usize],
    bread: &DMatrix<f64>,
    n_params: usize,
) -> Result<DMatrix<f64>, EconError> {
    let n = x.nrows();
    let k = x.ncols();
    let groups: BTreeSet<usize> = cluster.iter().copied().collect();
    let g = groups.len();
    if g < 2 {
        return Err(EconError::TooFewClusters(g));
    }
    let mut scores: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        let s = scores.entry(cluster[i]).or_insert_with(|| DVector::zeros(k));
        s.axpy(u[i], &x.row(i).transpose(), 1.0);
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in scores.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - n_params as f64));
    Ok(bread * meat * bread * factor)
}

/// Convenience form: CR1 standard errors of an OLS fit of `y` on `x`.
pub fn clustered_se(x: &DMatrix<f64>, y: &[f64], cluster: &[usize]) -> Result<Vec<f64>, EconError> {
    let (beta, bread) = least_squares(x, &DVector::from_column_slice(y))?;
    let fitted = x * &beta;
    let u: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let v = clustered_vcov(x, &u, cluster, &bread, x.ncols())?;
    Ok(v.diagonal().iter().map(|d| d.sqrt()).collect())
}

/// Keeps the largest connected component of the player-month graph.
fn largest_component(obs: &[Obs]) -> (Vec<Obs>, Vec<String>) {
    let players: Vec<&str> = obs.iter().map(|o| o.player.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let months: Vec<Month> = obs.iter().map(|o| o.month).collect::<BTreeSet<_>>().into_iter().collect();
    let pi: BTreeMap<&str, usize> = players.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    let ti: BTreeMap<Month, usize> = months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut parent: Vec<usize> = (0..players.len() + months.len()).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for o in obs {
        let a = find(&mut parent, pi[o.player.as_str()]);
        let b = find(&mut parent, players.len() + ti[&o.month]);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut size: BTreeMap<usize, usize> = BTreeMap::new();
    for o in obs {
        *size.entry(find(&mut parent, pi[o.player.as_str()])).or_default() += 1;
    }
    // largest by observations; ties go to the component of the smaller id
    let best = size.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(r, _)| *r);
    let mut keep = Vec::new();
    let mut dropped = BTreeSet::new();
    for o in obs {
        if Some(find(&mut parent, pi[o.player.as_str()])) == best {
            keep.push(o.clone());
        } else {
            dropped.insert(o.player.clone());
        }
    }
    (keep, dropped.into_iter().collect())
}

fn fit_fe(mut obs: Vec<Obs>, x_names: &[String], opts: FitOptions) -> Result<RegressionFit, EconError> {
    obs.sort_by(|a, b| (a.player.as_str(), a.month).cmp(&(b.player.as_str(), b.month)));
    let mut notes = Vec::new();

    // players seen once carry no within variation
    let mut count: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &obs {
        *count.entry(o.player.as_str()).or_default() += 1;
    }
    let singles: Vec<String> = count.iter().filter(|(_, c)| **c == 1).map(|(p, _)| p.to_string()).collect();
    let n_before = count.len();
    if !singles.is_empty() && singles.len() < n_before {
        notes.push(format!("dropped {} players observed in a single month", singles.len()));
        obs.retain(|o| !singles.contains(&o.player));
    }
    let mut dropped_players = if singles.len() < n_before { singles } else { Vec::new() };
    let (obs, disconnected) = largest_component(&obs);
    if !disconnected.is_empty() {
        notes.push(format!("dropped {} players outside the largest connected component", disconnected.len()));
        dropped_players.extend(disconnected);
        dropped_players.sort();
    }

    let players: Vec<String> = obs.iter().map(|o| o.player.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let months: Vec<Month> = obs.iter().map(|o| o.month).collect::<BTreeSet<_>>().into_iter().collect();
    if months.len() < 2 {
        return Err(EconError::RankDeficient("need at least two months".into()));
    }
    let pi: BTreeMap<&str, usize> = players.iter().enumerate().map(|(i, p)| (p.as_str(), i)).collect();
    let ti: BTreeMap<Month, usize> = months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let n = obs.len();
    let (np, nt, nx) = (players.len(), months.len(), x_names.len());
    let n_params = 1 + (np - 1) + (nt - 1) + nx;
    if n < n_params {
        return Err(EconError::RankDeficient(format!("{n} observations for {n_params} parameters")));
    }
    if np == 1 {
        notes.push("single player: player effect absorbed into the intercept".into());
    }
    let groups = Groups::new(
        obs.iter().map(|o| pi[o.player.as_str()]).collect(),
        obs.iter().map(|o| ti[&o.month]).collect(),
        obs.iter().map(|o| o.w).collect(),
        np,
        nt,
    );
    let y: Vec<f64> = obs.iter().map(|o| o.y).collect();
    let sw: Vec<f64> = groups.w.iter().map(|w| w.sqrt()).collect();

    // coefficient vectors in the layout [intercept, players 1.., months 1.., x]
    let (beta, alpha, tau, intercept) = match opts.method {
        FeMethod::Absorb => {
            let mut yt = y.clone();
            groups.demean_both(&mut yt)?;
            let mut xt = DMatrix::zeros(n, nx);
            for j in 0..nx {
                let mut col: Vec<f64> = obs.iter().map(|o| o.x[j]).collect();
                groups.demean_both(&mut col)?;
                for i in 0..n {
                    xt[(i, j)] = col[i] * sw[i];
                }
            }
            let ytw: Vec<f64> = yt.iter().zip(&sw).map(|(a, b)| a * b).collect();
            let (beta, _) = least_squares(&xt, &DVector::from_vec(ytw))?;
            let r: Vec<f64> = obs.iter().map(|o| o.y - o.x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>()).collect();
            // fitted effects are r minus the double-demeaned residual
            let mut e = r.clone();
            groups.demean_both(&mut e)?;
            let f: Vec<f64> = r.iter().zip(&e).map(|(a, b)| a - b).collect();
            let (a, t) = groups.backfit(&f)?;
            let intercept = a[0] + t[0];
            let alpha: Vec<f64> = a.iter().map(|v| v - a[0]).collect();
            let tau: Vec<f64> = t.iter().map(|v| v - t[0]).collect();
            (beta.iter().copied().collect::<Vec<_>>(), alpha, tau, intercept)
        }
        FeMethod::Dummies => {
            let x = full_design(&obs, &groups, np, nt, nx);
            let xw = weight_rows(&x, &sw);
            let yw = DVector::from_iterator(n, y.iter().zip(&sw).map(|(a, b)| a * b));
            let (b, _) = least_squares(&xw, &yw)?;
            let mut alpha = vec![0.0; np];
            alpha[1..].copy_from_slice(&b.as_slice()[1..np]);
            let mut tau = vec![0.0; nt];
            tau[1..].copy_from_slice(&b.as_slice()[np..np + nt - 1]);
            (b.as_slice()[np + nt - 1..].to_vec(), alpha, tau, b[0])
        }
    };

    let residuals: Vec<f64> = obs
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let xb: f64 = o.x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            o.y - intercept - alpha[groups.player[k]] - tau[groups.month[k]] - xb
        })
        .collect();
    let wsum: f64 = groups.w.iter().sum();
    let ybar = y.iter().zip(&groups.w).map(|(a, w)| a * w).sum::<f64>() / wsum;
    let sst: f64 = y.iter().zip(&groups.w).map(|(a, w)| w * (a - ybar).powi(2)).sum();
    let ssr: f64 = residuals.iter().zip(&groups.w).map(|(e, w)| w * e * e).sum();
    let r2 = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };
    let adj_r2 = if n > n_params { 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - n_params as f64) } else { r2 };

    // SEs for [tau (non-base), x] from the design with only player effects
    // partialled out, which gives the same sandwich as the full design.
    let mut z = DMatrix::zeros(n, nt - 1 + nx);
    for j in 0..nt - 1 + nx {
        let mut col: Vec<f64> = (0..n)
            .map(|k| if j < nt - 1 { f64::from(groups.month[k] == j + 1) } else { obs[k].x[j - (nt - 1)] })
            .collect();
        if np > 1 {
            groups.demean_player(&mut col);
        } else {
            let m = groups.means(&col, true)[0];
            col.iter_mut().for_each(|v| *v -= m);
        }
        for i in 0..n {
            z[(i, j)] = col[i] * sw[i];
        }
    }
    let uw: Vec<f64> = residuals.iter().zip(&sw).map(|(a, b)| a * b).collect();
    let se: Option<Vec<f64>> = if z.ncols() == 0 {
        Some(Vec::new())
    } else if n == n_params {
        notes.push("standard errors unavailable: no residual degrees of freedom".into());
        None
    } else {
        let (_, bread) = least_squares(&z, &DVector::zeros(n))?;
        match clustered_vcov(&z, &uw, &groups.player, &bread, n_params) {
            Ok(v) => Some(v.diagonal().iter().map(|d| d.max(0.0).sqrt()).collect()),
            Err(EconError::TooFewClusters(g)) => {
                notes.push(format!("standard errors unavailable: {g} cluster"));
                None
            }
            Err(e) => return Err(e),
        }
    };
    let df_t = np as f64 - 1.0;
    let coefficients = x_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let s = se.as_ref().map(|s| s[nt - 1 + j]);
            let t = s.filter(|s| *s > 0.0).map(|s| beta[j] / s);
            let p = t.and_then(|t| t_cdf(-t.abs(), df_t).ok()).map(|q| (2.0 * q).min(1.0));
            Coef { name: name.clone(), estimate: beta[j], se: s, t, p, stars: stars(p).into() }
        })
        .collect();
    let tau_series = months
        .iter()
        .enumerate()
        .map(|(t, m)| TauPoint { month: *m, tau: tau[t], se: if t == 0 { None } else { se.as_ref().map(|s| s[t - 1]) } })
        .collect();

    Ok(RegressionFit {
        method: opts.method,
        weighted: opts.weighted,
        coefficients,
        intercept,
        base_player: players[0].clone(),
        player_effects: players.iter().cloned().zip(alpha).collect(),
        tau_series,
        residuals,
        obs: obs.iter().map(|o| (o.player.clone(), o.month)).collect(),
        r2,
        adj_r2,
        n_obs: n,
        n_players: np,
        n_months: nt,
        n_params,
        cluster_level: "player".into(),
        n_clusters: np,
        dropped_players,
        notes,
    })
}

fn full_design(obs: &[Obs], g: &Groups, np: usize, nt: usize, nx: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(obs.len(), np + nt - 1 + nx);
    for (k, o) in obs.iter().enumerate() {
        x[(k, 0)] = 1.0;
        if g.player[k] > 0 {
            x[(k, g.player[k])] = 1.0;
        }
        if g.month[k] > 0 {
            x[(k, np + g.month[k] - 1)] = 1.0;
        }
        for j in 0..nx {
            x[(k, np + nt - 1 + j)] = o.x[j];
        }
    }
    x
}

fn weight_rows(x: &DMatrix<f64>, sw: &[f64]) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, s) in sw.iter().enumerate() {
        out.row_mut(i).scale_mut(*s);
    }
    out
}

fn cell_obs(c: &PanelCell, weighted: bool, x: Vec<f64>) -> Obs {
    Obs {
        player: c.player_id.clone(),
        month: c.month,
        y: c.mean_gap,
        w: if weighted { c.n_matches as f64 } else { 1.0 },
        x,
    }
}

/// Time-trend regression with player and month effects only.
pub fn fit_two_way_fe(panel: &[PanelCell], opts: FitOptions) -> Result<RegressionFit, EconError> {
    let obs = panel.iter().map(|c| cell_obs(c, opts.weighted, Vec::new())).collect();
    fit_fe(obs, &[], opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostDefinition {
    AfterEvent1,
    BetweenEvents,
    AfterEvent2,
}

impl PostDefinition {
    pub const ALL: [PostDefinition; 3] =
        [PostDefinition::AfterEvent1, PostDefinition::BetweenEvents, PostDefinition::AfterEvent2];
}

/// Post-period definition for the difference-in-differences fit. Months
/// before `event_1` form the pre period; the post window is inclusive at
/// both ends; months outside both are left out of the sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DidSpec {
    pub post_definition: PostDefinition,
    pub event_1: Month,
    pub event_2: Month,
    pub end: Month,
}

impl DidSpec {
    pub fn new(post_definition: PostDefinition) -> DidSpec {
        DidSpec { post_definition, event_1: Month::new(2016, 5), event_2: Month::new(2017, 10), end: Month::new(2020, 5) }
    }

    pub fn window(&self) -> (Month, Month) {
        match self.post_definition {
            PostDefinition::AfterEvent1 => (self.event_1, self.end),
            PostDefinition::BetweenEvents => (self.event_1, self.event_2),
            PostDefinition::AfterEvent2 => (self.event_2, self.end),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.event_1 <= self.event_2 && self.event_2 <= self.end) {
            return Err(format!("event months out of order: {} {} {}", self.event_1, self.event_2, self.end));
        }
        Ok(())
    }
}

pub const DID_TERM: &str = "treated_x_post";

/// Treatment status per player: the first non-`none` flag in month order.
pub fn player_treatment(panel: &[PanelCell]) -> BTreeMap<String, bool> {
    let mut cells: Vec<&PanelCell> = panel.iter().collect();
    cells.sort_by(|a, b| (a.month, &a.player_id).cmp(&(b.month, &b.player_id)));
    let mut out = BTreeMap::new();
    for c in cells {
        if c.group != GroupFlag::None {
            out.entry(c.player_id.clone()).or_insert(c.group == GroupFlag::Treated);
        }
    }
    out
}

/// Two-way FE regression with the treated-by-post interaction.
pub fn fit_did(panel: &[PanelCell], spec: &DidSpec, opts: FitOptions) -> Result<RegressionFit, EconError> {
    let treatment = player_treatment(panel);
    let (lo, hi) = spec.window();
    let obs: Vec<Obs> = panel
        .iter()
        .filter(|c| c.month < spec.event_1 || (lo <= c.month && c.month <= hi))
        .filter_map(|c| {
            let treated = *treatment.get(&c.player_id)?;
            let post = lo <= c.month && c.month <= hi;
            Some(cell_obs(c, opts.weighted, vec![f64::from(treated && post)]))
        })
        .collect();
    let in_sample: BTreeSet<&str> = obs.iter().map(|o| o.player.as_str()).collect();
    if !in_sample.iter().any(|p| !treatment[*p]) {
        return Err(EconError::NoControlGroup);
    }
    if !in_sample.iter().any(|p| treatment[*p]) {
        return Err(EconError::NoTreatedGroup);
    }
    if !obs.iter().any(|o| lo <= o.month && o.month <= hi) {
        return Err(EconError::NoPostPeriod(format!("{lo}..{hi}")));
    }
    let mut fit = fit_fe(obs, &[DID_TERM.to_string()], opts)?;
    fit.notes.push(format!("post window {lo}..{hi} inclusive; pre period before {}", spec.event_1));
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendRow {
    pub month: Month,
    pub tau_hat: f64,
    pub se: Option<f64>,
    /// 95% band from the clustered SE.
    pub ci95_low_clustered: Option<f64>,
    pub ci95_high_clustered: Option<f64>,
}

/// Month effects relative to the base month, with clustered bands.
pub fn trend_table(fit: &RegressionFit) -> Vec<TrendRow> {
    fit.tau_series
        .iter()
        .map(|p| TrendRow {
            month: p.month,
            tau_hat: p.tau,
            se: p.se,
            ci95_low_clustered: p.se.map(|s| p.tau - 1.96 * s),
            ci95_high_clustered: p.se.map(|s| p.tau + 1.96 * s),
        })
        .collect()
}

/// Plain-text table with one column per fit, in the layout of a
/// difference-in-differences results table.
pub fn did_text_table(columns: &[(String, RegressionFit)]) -> String {
    let width = 18;
    let mut out = String::new();
    let row = |out: &mut String, label: &str, cells: Vec<String>| {
        let _ = write!(out, "{label:<22}");
        for c in cells {
            let _ = write!(out, "{c:>width$}");
        }
        out.push('\n');
    };
    row(&mut out, "", (1..=columns.len()).map(|i| format!("({i})")).collect());
    row(&mut out, "Post period", columns.iter().map(|(l, _)| l.clone()).collect());
    let rule = "-".repeat(22 + width * columns.len());
    out.push_str(&rule);
    out.push('\n');
    row(
        &mut out,
        "Treated x Post",
        columns
            .iter()
            .map(|(_, f)| f.coef(DID_TERM).map_or("-".into(), |c| format!("{:.3}{}", c.estimate, c.stars)))
            .collect(),
    );
    row(
        &mut out,
        "",
        columns
            .iter()
            .map(|(_, f)| f.coef(DID_TERM).and_then(|c| c.se).map_or(String::new(), |s| format!("({s:.3})")))
            .collect(),
    );
    row(&mut out, "Player FE", columns.iter().map(|_| "Yes".into()).collect());
    row(&mut out, "Month FE", columns.iter().map(|_| "Yes".into()).collect());
    row(&mut out, "Observations", columns.iter().map(|(_, f)| f.n_obs.to_string()).collect());
    row(&mut out, "Players", columns.iter().map(|(_, f)| f.n_players.to_string()).collect());
    row(&mut out, "R-squared", columns.iter().map(|(_, f)| format!("{:.3}", f.r2)).collect());
    out.push_str(&rule);
    out.push('\n');
    out.push_str("Standard errors clustered at the player level in parentheses.\n");
    out.push_str("*** p<0.01, ** p<0.05, * p<0.1\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cell(p: &str, m: Month, y: f64) -> PanelCell {
        PanelCell { player_id: p.into(), month: m, mean_gap: y, n_matches: 1, n_moves_used: 50, group: GroupFlag::None }
    }

    fn noiseless(np: usize, nt: usize, seed: u64) -> (Vec<PanelCell>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..np).map(|_| rng.random_range(-2.0..2.0)).collect();
        let tau: Vec<f64> = (0..nt).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cells = Vec::new();
        for (i, a) in alpha.iter().enumerate() {
            for (t, b) in tau.iter().enumerate() {
                if rng.random_bool(0.8) || t == 0 || i == 0 {
                    cells.push(cell(&format!("p{i:03}"), Month(24000 + t as i32), a + b));
                }
            }
        }
        (cells, tau)
    }

    #[test]
    fn noiseless_recovery() {
        let (cells, tau) = noiseless(12, 9, 1);
        for method in [FeMethod::Absorb, FeMethod::Dummies] {
            let fit = fit_two_way_fe(&cells, FitOptions { method, weighted: false }).unwrap();
            for (t, p) in fit.tau_series.iter().enumerate() {
                assert!((p.tau - (tau[t] - tau[0])).abs() < 1e-8, "{method:?} {t}");
            }
            assert!((fit.r2 - 1.0).abs() < 1e-10);
            assert!(fit.adj_r2 <= fit.r2);
        }
    }

    #[test]
    fn methods_agree_on_noisy_panel() {
        let (mut cells, _) = noiseless(10, 12, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for c in &mut cells {
            c.mean_gap += rng.random_range(-0.5..0.5);
            c.n_matches = rng.random_range(1..4);
        }
        for weighted in [false, true] {
            let a = fit_two_way_fe(&cells, FitOptions { method: FeMethod::Absorb, weighted }).unwrap();
            let d = fit_two_way_fe(&cells, FitOptions { method: FeMethod::Dummies, weighted }).unwrap();
            for (x, y) in a.tau_series.iter().zip(&d.tau_series) {
                assert!((x.tau - y.tau).abs() <= 1e-8 * y.tau.abs().max(1.0));
                assert!((x.se.unwrap_or(0.0) - y.se.unwrap_or(0.0)).abs() < 1e-10);
            }
            for (x, y) in a.player_effects.iter().zip(&d.player_effects) {
                assert!((x.1 - y.1).abs() <= 1e-8 * y.1.abs().max(1.0));
            }
            assert!((a.intercept - d.intercept).abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_sum_to_zero_within_groups() {
        let (mut cells, _) = noiseless(8, 7, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for c in &mut cells {
            c.mean_gap += rng.random_range(-1.0..1.0);
        }
        let fit = fit_two_way_fe(&cells, FitOptions::default()).unwrap();
        let mut by_p: BTreeMap<&str, f64> = BTreeMap::new();
        let mut by_t: BTreeMap<Month, f64> = BTreeMap::new();
        for ((p, m), e) in fit.obs.iter().zip(&fit.residuals) {
            *by_p.entry(p).or_default() += e;
            *by_t.entry(*m).or_default() += e;
        }
        assert!(by_p.values().chain(by_t.values()).all(|s| s.abs() < 1e-8));
    }

    #[test]
    fn constant_shift_leaves_tau_unchanged() {
        let (cells, _) = noiseless(6, 5, 5);
        let shifted: Vec<_> = cells.iter().map(|c| PanelCell { mean_gap: c.mean_gap + 3.25, ..c.clone() }).collect();
        let a = trend_table(&fit_two_way_fe(&cells, FitOptions::default()).unwrap());
        let b = trend_table(&fit_two_way_fe(&shifted, FitOptions::default()).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.tau_hat - y.tau_hat).abs() < 1e-10);
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let (mut cells, _) = noiseless(6, 5, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in &mut cells {
            c.mean_gap += rng.random_range(-1.0..1.0);
        }
        let a = fit_two_way_fe(&cells, FitOptions::default()).unwrap();
        cells.reverse();
        let b = fit_two_way_fe(&cells, FitOptions::default()).unwrap();
        assert_eq!(trend_table(&a), trend_table(&b));
    }

    #[test]
    fn single_player_panel() {
        let cells: Vec<_> = (0..6).map(|t| cell("solo", Month(24000 + t), t as f64 * 0.5)).collect();
        let fit = fit_two_way_fe(&cells, FitOptions::default()).unwrap();
        assert_eq!(fit.n_players, 1);
        assert!((fit.tau_series[5].tau - 2.5).abs() < 1e-12);
        assert!(fit.tau_series[5].se.is_none());
        assert!(fit.notes.iter().any(|n| n.contains("single player")));
    }

    #[test]
    fn singleton_players_are_dropped() {
        let (mut cells, _) = noiseless(5, 5, 7);
        cells.push(cell("zz-once", Month(24002), 9.0));
        let fit = fit_two_way_fe(&cells, FitOptions::default()).unwrap();
        assert_eq!(fit.dropped_players, vec!["zz-once".to_string()]);
    }

    #[test]
    fn qr_least_squares_matches_normal_equations() {
        let x = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 2.0, 5.0, 4.0]);
        let (b, inv) = least_squares(&x, &y).unwrap();
        let xtx = x.transpose() * &x;
        let direct = xtx.clone().try_inverse().unwrap();
        let bd = &direct * x.transpose() * &y;
        assert!((b - bd).norm() < 1e-12);
        assert!((inv - direct).norm() < 1e-12);
        let collinear = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(least_squares(&collinear, &DVector::zeros(3)), Err(EconError::RankDeficient(_))));
    }

    #[test]
    fn sandwich_three_clusters_of_two() {
        // y on (1, x) with clusters {0,1}, {2,3}, {4,5}.
        // x = 0..5, y = [1, 2, 2, 5, 4, 7]. Hand computation:
        // X'X = [[6, 15], [15, 55]], det 105, inverse [[55, -15], [-15, 6]] / 105
        // beta = (X'X)^-1 X'y with X'y = [21, 72]: b0 = (1155 - 1080)/105 = 5/7,
        // b1 = (-315 + 432)/105 = 39/35.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 2.0, 2.0, 5.0, 4.0, 7.0];
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let b0 = 5.0 / 7.0;
        let b1 = 39.0 / 35.0;
        let u: Vec<f64> = (0..6).map(|i| y[i] - b0 - b1 * xs[i]).collect();
        // cluster scores s_g = sum over the cluster of (u, u x)
        let mut meat = [[0.0; 2]; 2];
        for g in 0..3 {
            let s = [u[2 * g] + u[2 * g + 1], u[2 * g] * xs[2 * g] + u[2 * g + 1] * xs[2 * g + 1]];
            for a in 0..2 {
                for b in 0..2 {
                    meat[a][b] += s[a] * s[b];
                }
            }
        }
        let inv = [[55.0 / 105.0, -15.0 / 105.0], [-15.0 / 105.0, 6.0 / 105.0]];
        let c = 1.5 * 5.0 / 4.0;
        let mut want = [0.0; 2];
        for (k, w) in want.iter_mut().enumerate() {
            let mut v = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    v += inv[k][a] * meat[a][b] * inv[b][k];
                }
            }
            *w = (c * v).sqrt();
        }
        let se = clustered_se(&x, &y, &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((se[0] - want[0]).abs() < 1e-10 && (se[1] - want[1]).abs() < 1e-10, "{se:?} {want:?}");
        assert!(matches!(clustered_se(&x, &y, &[0; 6]), Err(EconError::TooFewClusters(1))));
    }

    #[test]
    fn one_observation_per_cluster_is_hc1() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let y = [1.0, 2.0, 2.0, 5.0, 4.0, 7.0, 6.5];
        let x = DMatrix::from_fn(7, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let (b, inv) = least_squares(&x, &DVector::from_column_slice(&y)).unwrap();
        let u: Vec<f64> = (0..7).map(|i| y[i] - b[0] - b[1] * xs[i]).collect();
        let mut meat = DMatrix::zeros(2, 2);
        for i in 0..7 {
            let r = x.row(i).transpose();
            meat += &r * r.transpose() * (u[i] * u[i]);
        }
        // HC1 factor n / (n - k); CR1 with G = n gives the same number
        let hc1 = &inv * meat * &inv * (7.0 / 5.0);
        let se = clustered_se(&x, &y, &[0, 1, 2, 3, 4, 5, 6]).unwrap();
        for k in 0..2 {
            assert!((se[k] - hc1[(k, k)].sqrt()).abs() < 1e-12);
        }
    }

    fn did_panel(seed: u64, beta: f64) -> Vec<PanelCell> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells = Vec::new();
        for i in 0..30 {
            let treated = i % 2 == 0;
            let a: f64 = rng.random_range(0.0..3.0);
            for t in 0..36 {
                let m = Month::new(2015, 1).0 + t;
                let post = (Month::new(2016, 5).0..=Month::new(2020, 5).0).contains(&m);
                let y = a + 0.05 * t as f64 + if treated && post { beta } else { 0.0 } + rng.random_range(-0.3..0.3);
                cells.push(PanelCell {
                    group: if treated { GroupFlag::Treated } else { GroupFlag::Control },
                    ..cell(&format!("p{i:02}"), Month(m), y)
                });
            }
        }
        cells
    }

    #[test]
    fn did_relabeling_flips_sign() {
        let cells = did_panel(3, -0.278);
        let spec = DidSpec::new(PostDefinition::AfterEvent1);
        let fit = fit_did(&cells, &spec, FitOptions::default()).unwrap();
        let swapped: Vec<_> = cells
            .iter()
            .map(|c| PanelCell {
                group: if c.group == GroupFlag::Treated { GroupFlag::Control } else { GroupFlag::Treated },
                ..c.clone()
            })
            .collect();
        let flipped = fit_did(&swapped, &spec, FitOptions::default()).unwrap();
        let (b, bf) = (fit.coef(DID_TERM).unwrap(), flipped.coef(DID_TERM).unwrap());
        assert!((b.estimate + bf.estimate).abs() < 1e-10);
        assert!((b.se.unwrap() - bf.se.unwrap()).abs() < 1e-10);
        assert!((b.estimate + 0.278).abs() < 3.0 * b.se.unwrap());
    }

    #[test]
    fn did_frisch_waugh_on_balanced_panel() {
        // balanced panel: double demeaning is v - row mean - column mean + grand mean
        let cells = did_panel(4, -0.278);
        let spec = DidSpec::new(PostDefinition::AfterEvent1);
        let fit = fit_did(&cells, &spec, FitOptions::default()).unwrap();
        let treat = player_treatment(&cells);
        let players: Vec<String> = treat.keys().cloned().collect();
        let months: Vec<Month> = cells.iter().map(|c| c.month).collect::<BTreeSet<_>>().into_iter().collect();
        let (np, nt) = (players.len(), months.len());
        let mut y = DMatrix::zeros(np, nt);
        let mut d = DMatrix::zeros(np, nt);
        for c in &cells {
            let i = players.iter().position(|p| *p == c.player_id).unwrap();
            let t = months.iter().position(|m| *m == c.month).unwrap();
            y[(i, t)] = c.mean_gap;
            d[(i, t)] = f64::from(treat[&c.player_id] && c.month >= spec.event_1);
        }
        let dd = |m: &DMatrix<f64>| {
            let g = m.mean();
            DMatrix::from_fn(np, nt, |i, t| m[(i, t)] - m.row(i).mean() - m.column(t).mean() + g)
        };
        let (yt, dt) = (dd(&y), dd(&d));
        let beta = yt.dot(&dt) / dt.dot(&dt);
        assert!((fit.coef(DID_TERM).unwrap().estimate - beta).abs() < 1e-10);
        let dummies = fit_did(&cells, &spec, FitOptions { method: FeMethod::Dummies, weighted: false }).unwrap();
        assert!((dummies.coef(DID_TERM).unwrap().estimate - beta).abs() < 1e-10);
    }

    #[test]
    fn did_errors() {
        let cells = did_panel(5, 0.0);
        let spec = DidSpec::new(PostDefinition::AfterEvent1);
        let only_treated: Vec<_> = cells.iter().filter(|c| c.group == GroupFlag::Treated).cloned().collect();
        assert_eq!(fit_did(&only_treated, &spec, FitOptions::default()).unwrap_err(), EconError::NoControlGroup);
        let early: Vec<_> = cells.iter().filter(|c| c.month < Month::new(2016, 5)).cloned().collect();
        assert!(matches!(fit_did(&early, &spec, FitOptions::default()), Err(EconError::NoPostPeriod(_))));
    }

    #[test]
    fn did_windows() {
        let s = |p| DidSpec::new(p).window();
        assert_eq!(s(PostDefinition::AfterEvent1), (Month::new(2016, 5), Month::new(2020, 5)));
        assert_eq!(s(PostDefinition::BetweenEvents), (Month::new(2016, 5), Month::new(2017, 10)));
        assert_eq!(s(PostDefinition::AfterEvent2), (Month::new(2017, 10), Month::new(2020, 5)));
    }

    #[test]
    fn text_table_layout() {
        let cells = did_panel(6, -0.278);
        let cols: Vec<_> = PostDefinition::ALL
            .iter()
            .map(|p| {
                let spec = DidSpec::new(*p);
                let (a, b) = spec.window();
                (format!("{a}..{b}"), fit_did(&cells, &spec, FitOptions::default()).unwrap())
            })
            .collect();
        let t = did_text_table(&cols);
        assert!(t.contains("Treated x Post"));
        assert!(t.contains("(3)"));
        assert_eq!(t.lines().filter(|l| l.starts_with("Observations")).count(), 1);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(Some(0.005)), "***");
        assert_eq!(stars(Some(0.01)), "**");
        assert_eq!(stars(Some(0.07)), "*");
        assert_eq!(stars(Some(0.1)), "");
        assert_eq!(stars(None), "");
    }
}
