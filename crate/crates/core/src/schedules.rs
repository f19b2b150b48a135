//! Parameter sequences (`α_n`, `β_n`, `r_n`, `λ_n`) with analytic
//! certificates for the H3,N items and prefix heuristics for everything a
//! certificate does not cover.
//!
//! Indices start at `n = 0`. The decaying families are shifted so that the
//! first value is strictly below one: `harmonic` is `c/(n+2)`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PREFIX: usize = 100_000;
pub const RUN_PREFIX: usize = 10_000;
pub const MIN_PREFIX: usize = 100;

/// Values below this count as zero in the heuristics.
const NEGLIGIBLE: f64 = 1e-14;
const BLOCK_RATIO_SUMMABLE: f64 = 0.95;
const BLOCK_RATIO_DIVERGENT: f64 = 0.9;
const LIMIT_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `c/(n+2)^p`
    Power { p: f64, c: f64 },
    /// `c/(n+2)`
    Harmonic {
        #[serde(default = "one")]
        c: f64,
    },
    /// `c/ln(n+3)`
    ConstantOverLog { c: f64 },
    /// `base + c/(n+1)^p`
    OffsetPower { base: f64, c: f64, p: f64 },
    Constant { value: f64 },
    /// `values[n mod len]`
    Periodic { values: Vec<f64> },
    /// Finite list; indices past the end are an error.
    CustomList { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

/// A validated schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct Schedule {
    spec: ScheduleSpec,
}

impl From<Schedule> for ScheduleSpec {
    fn from(s: Schedule) -> Self {
        s.spec
    }
}

impl TryFrom<ScheduleSpec> for Schedule {
    type Error = Error;

    fn try_from(spec: ScheduleSpec) -> Result<Self> {
        Schedule::new(spec)
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("schedule parameter {name} must be finite")))
    }
}

fn in_unit_scale(c: f64) -> Result<()> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("scale c = {c} must lie in (0, 1]")))
    }
}

fn list(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("schedule list must not be empty"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("schedule value {i} is not finite")));
    }
    Ok(())
}

impl Schedule {
    pub fn new(spec: ScheduleSpec) -> Result<Self> {
        match &spec {
            ScheduleSpec::Power { p, c } => {
                finite("p", *p)?;
                if *p <= 0.0 {
                    return Err(Error::invalid(format!("power exponent p = {p} must be positive")));
                }
                in_unit_scale(*c)?;
            }
            ScheduleSpec::Harmonic { c } => in_unit_scale(*c)?,
            ScheduleSpec::ConstantOverLog { c } => {
                if !(*c > 0.0 && *c < 3f64.ln()) {
                    return Err(Error::invalid(format!("scale c = {c} must lie in (0, ln 3)")));
                }
            }
            ScheduleSpec::OffsetPower { base, c, p } => {
                finite("base", *base)?;
                finite("c", *c)?;
                finite("p", *p)?;
                if *p <= 0.0 {
                    return Err(Error::invalid(format!("power exponent p = {p} must be positive")));
                }
            }
            ScheduleSpec::Constant { value } => finite("value", *value)?,
            ScheduleSpec::Periodic { values } | ScheduleSpec::CustomList { values } => list(values)?,
        }
        Ok(Schedule { spec })
    }

    pub fn power(p: f64, c: f64) -> Result<Self> {
        Schedule::new(ScheduleSpec::Power { p, c })
    }

    pub fn harmonic() -> Self {
        Schedule::new(ScheduleSpec::Harmonic { c: 1.0 }).expect("valid")
    }

    pub fn constant(value: f64) -> Result<Self> {
        Schedule::new(ScheduleSpec::Constant { value })
    }

    pub fn offset_power(base: f64, c: f64, p: f64) -> Result<Self> {
        Schedule::new(ScheduleSpec::OffsetPower { base, c, p })
    }

    pub fn custom(values: Vec<f64>) -> Result<Self> {
        Schedule::new(ScheduleSpec::CustomList { values })
    }

    pub fn periodic(values: Vec<f64>) -> Result<Self> {
        Schedule::new(ScheduleSpec::Periodic { values })
    }

    pub fn spec(&self) -> &ScheduleSpec {
        &self.spec
    }

    pub fn family(&self) -> &'static str {
        match self.spec {
            ScheduleSpec::Power { .. } => "power",
            ScheduleSpec::Harmonic { .. } => "harmonic",
            ScheduleSpec::ConstantOverLog { .. } => "constant_over_log",
            ScheduleSpec::OffsetPower { .. } => "offset_power",
            ScheduleSpec::Constant { .. } => "constant",
            ScheduleSpec::Periodic { .. } => "periodic",
            ScheduleSpec::CustomList { .. } => "custom_list",
        }
    }

    /// Number of available terms; `None` for infinite families.
    pub fn len(&self) -> Option<usize> {
        match &self.spec {
            ScheduleSpec::CustomList { values } => Some(values.len()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, n: usize) -> Result<f64> {
        let x = n as f64;
        Ok(match &self.spec {
            ScheduleSpec::Power { p, c } => c / (x + 2.0).powf(*p),
            ScheduleSpec::Harmonic { c } => c / (x + 2.0),
            ScheduleSpec::ConstantOverLog { c } => c / (x + 3.0).ln(),
            ScheduleSpec::OffsetPower { base, c, p } => base + c / (x + 1.0).powf(*p),
            ScheduleSpec::Constant { value } => *value,
            ScheduleSpec::Periodic { values } => values[n % values.len()],
            ScheduleSpec::CustomList { values } => *values.get(n).ok_or_else(|| {
                Error::invalid(format!(
                    "custom schedule has {} terms, index {n} requested",
                    values.len()
                ))
            })?,
        })
    }

    /// The first `len` values.
    pub fn prefix(&self, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|n| self.value(n)).collect()
    }

    /// `(inf, sup)` over all indices.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.spec {
            ScheduleSpec::Power { p, c } => (0.0, c / 2f64.powf(*p)),
            ScheduleSpec::Harmonic { c } => (0.0, c / 2.0),
            ScheduleSpec::ConstantOverLog { c } => (0.0, c / 3f64.ln()),
            ScheduleSpec::OffsetPower { base, c, .. } => {
                (base.min(base + c), base.max(base + c))
            }
            ScheduleSpec::Constant { value } => (*value, *value),
            ScheduleSpec::Periodic { values } | ScheduleSpec::CustomList { values } => (
                values.iter().copied().fold(f64::INFINITY, f64::min),
                values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
        }
    }

    /// `true` iff every value lies in the open interval `(a, b)`.
    pub fn values_within_open(&self, a: f64, b: f64) -> bool {
        let (lo, hi) = self.bounds();
        match &self.spec {
            // The infimum 0 is approached but never attained.
            ScheduleSpec::Power { .. }
            | ScheduleSpec::Harmonic { .. }
            | ScheduleSpec::ConstantOverLog { .. } => a <= lo && hi < b,
            ScheduleSpec::OffsetPower { base, c, .. } if *c > 0.0 => a <= *base && hi < b,
            ScheduleSpec::OffsetPower { base, c, .. } if *c < 0.0 => a < lo && *base <= b,
            _ => a < lo && hi < b,
        }
    }

    pub fn limit(&self) -> Option<f64> {
        match &self.spec {
            ScheduleSpec::Power { .. }
            | ScheduleSpec::Harmonic { .. }
            | ScheduleSpec::ConstantOverLog { .. } => Some(0.0),
            ScheduleSpec::OffsetPower { base, .. } => Some(*base),
            ScheduleSpec::Constant { value } => Some(*value),
            ScheduleSpec::Periodic { values } => {
                let (lo, hi) = self.bounds();
                (lo == hi).then_some(values[0])
            }
            ScheduleSpec::CustomList { .. } => None,
        }
    }

    /// Smallest period for periodic schedules (1 for constants).
    fn period(&self) -> Option<usize> {
        match &self.spec {
            ScheduleSpec::Constant { .. } => Some(1),
            ScheduleSpec::Periodic { values } => Some(values.len()),
            ScheduleSpec::OffsetPower { c, .. } if *c == 0.0 => Some(1),
            _ => None,
        }
    }

    fn is_monotone_family(&self) -> bool {
        !matches!(
            self.spec,
            ScheduleSpec::Periodic { .. } | ScheduleSpec::CustomList { .. }
        )
    }

    /// Asymptotic size `n^-e (ln n)^-l` of the schedule itself (`None` when
    /// not of that form).
    fn decay(&self) -> Option<(f64, f64)> {
        match &self.spec {
            ScheduleSpec::Power { p, .. } => Some((*p, 0.0)),
            ScheduleSpec::Harmonic { .. } => Some((1.0, 0.0)),
            ScheduleSpec::ConstantOverLog { .. } => Some((0.0, 1.0)),
            ScheduleSpec::OffsetPower { base, c, p } => {
                if *base != 0.0 || *c == 0.0 {
                    Some((0.0, 0.0))
                } else {
                    Some((*p, 0.0))
                }
            }
            ScheduleSpec::Constant { value } if *value != 0.0 => Some((0.0, 0.0)),
            _ => None,
        }
    }

    /// Asymptotic size of `|s_{n+N} - s_n|` for the monotone families.
    fn difference_decay(&self) -> Option<(f64, f64)> {
        match &self.spec {
            ScheduleSpec::Power { p, .. } | ScheduleSpec::OffsetPower { p, .. } => {
                Some((p + 1.0, 0.0))
            }
            ScheduleSpec::Harmonic { .. } => Some((2.0, 0.0)),
            ScheduleSpec::ConstantOverLog { .. } => Some((1.0, 2.0)),
            _ => None,
        }
    }

    /// H3,N items this schedule satisfies by construction, for shift `n`.
    pub fn certifies(&self, item: H3Item, n_shift: usize) -> bool {
        use H3Item::*;
        let unit = self.values_within_open(0.0, 1.0);
        match &self.spec {
            ScheduleSpec::Power { p, .. } => match item {
                I => unit,
                II | Iv | IvPrime => true,
                III => *p <= 1.0,
            },
            ScheduleSpec::Harmonic { .. } | ScheduleSpec::ConstantOverLog { .. } => match item {
                I => unit,
                II | III | Iv | IvPrime => true,
            },
            ScheduleSpec::OffsetPower { base, c, p } => match item {
                I => unit,
                II => *base == 0.0,
                III => (*base > 0.0) || (*base == 0.0 && *c > 0.0 && *p <= 1.0),
                Iv => true,
                IvPrime => *base != 0.0 || *c != 0.0,
            },
            ScheduleSpec::Constant { value } => match item {
                I => unit,
                II => false,
                III => *value > 0.0,
                Iv => true,
                IvPrime => *value != 0.0,
            },
            ScheduleSpec::Periodic { values } => match item {
                I => unit,
                II => false,
                III => values.iter().all(|v| *v > 0.0),
                Iv => n_shift % values.len() == 0,
                IvPrime => n_shift % values.len() == 0 && values.iter().all(|v| *v != 0.0),
            },
            ScheduleSpec::CustomList { .. } => false,
        }
    }

    /// Certified difference condition for `self` against `alpha`.
    pub fn certifies_difference(&self, alpha: &Schedule, n_shift: usize, mode: DifferenceMode) -> bool {
        if self.period().is_some_and(|p| n_shift % p == 0) {
            return true;
        }
        match mode {
            DifferenceMode::Summable => self.is_monotone_family(),
            DifferenceMode::RatioVanishes => {
                match (self.difference_decay(), alpha.decay()) {
                    (Some((de, dl)), Some((ae, al))) => {
                        alpha.values_within_open(0.0, f64::INFINITY)
                            && (de > ae || (de == ae && dl > al))
                    }
                    _ => false,
                }
            }
        }
    }
}

/// The items of H3,N.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum H3Item {
    /// `α_n ∈ (0, 1)`
    #[serde(rename = "(i)")]
    I,
    /// `α_n -> 0`
    #[serde(rename = "(ii)")]
    II,
    /// `Σ α_n = ∞`
    #[serde(rename = "(iii)")]
    III,
    /// `Σ |α_{n+N} - α_n| < ∞`
    #[serde(rename = "(iv)")]
    Iv,
    /// `α_{n+N} / α_n -> 1`
    #[serde(rename = "(iv')")]
    IvPrime,
}

impl H3Item {
    pub const ALL: [H3Item; 5] = [H3Item::I, H3Item::II, H3Item::III, H3Item::Iv, H3Item::IvPrime];

    pub fn name(self) -> &'static str {
        match self {
            H3Item::I => "(i)",
            H3Item::II => "(ii)",
            H3Item::III => "(iii)",
            H3Item::Iv => "(iv)",
            H3Item::IvPrime => "(iv')",
        }
    }
}

impl fmt::Display for H3Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceMode {
    /// `Σ |s_{n+N} - s_n| < ∞`
    Summable,
    /// `|s_{n+N} - s_n| / α_n -> 0`
    RatioVanishes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Consistent,
    Violated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMode {
    Analytic,
    PrefixHeuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub item: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hypothesis: String,
    pub n_shift: usize,
    pub mode: ReportMode,
    pub prefix_length: usize,
    pub items: Vec<ItemReport>,
    pub observations: BTreeMap<String, f64>,
    pub verdict: Verdict,
}

impl HypothesisReport {
    pub fn item(&self, name: &str) -> Option<&ItemReport> {
        self.items.iter().find(|i| i.item == name)
    }
}

/// Outcome of one heuristic test on a prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub violated: bool,
    pub witness: Option<usize>,
    pub note: Option<String>,
    pub values: Vec<(&'static str, f64)>,
}

impl Observation {
    fn ok(values: Vec<(&'static str, f64)>) -> Self {
        Observation {
            violated: false,
            witness: None,
            note: None,
            values,
        }
    }

    fn bad(witness: usize, note: impl Into<String>, values: Vec<(&'static str, f64)>) -> Self {
        Observation {
            violated: true,
            witness: Some(witness),
            note: Some(note.into()),
            values,
        }
    }
}

fn max_over(a: &[f64], range: std::ops::Range<usize>) -> (usize, f64) {
    range
        .map(|i| (i, a[i]))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
}

fn sum_over(a: &[f64], range: std::ops::Range<usize>) -> f64 {
    a[range].iter().sum()
}

/// Heuristic for `a_n -> 0` on a nonnegative prefix: the tail maximum must
/// fall below the early maximum, and a geometric extrapolation from three
/// dyadic points must not settle near the last value.
pub fn decay_check(a: &[f64]) -> Observation {
    let p = a.len();
    let head = max_over(a, p / 100..(p / 50).max(p / 100 + 1));
    let tail = max_over(a, p / 2..p);
    let (a1, a2, a3) = (a[p / 4], a[p / 2], a[p - 1]);
    let (d1, d2) = (a2 - a1, a3 - a2);
    let limit = if d2.abs() <= NEGLIGIBLE {
        a3
    } else if d1 != 0.0 && (0.0..0.95).contains(&(d2 / d1)) && d2 / d1 > 0.0 {
        let rho = d2 / d1;
        a3 + d2 * rho / (1.0 - rho)
    } else {
        0.0
    };
    let values = vec![("head_max", head.1), ("tail_max", tail.1), ("extrapolated_limit", limit)];
    if tail.1 > NEGLIGIBLE && tail.1 >= head.1 {
        return Observation::bad(tail.0, "tail maximum does not fall below the early maximum", values);
    }
    if a3 > NEGLIGIBLE && limit > LIMIT_FRACTION * a3 {
        return Observation::bad(p - 1, "sequence levels off at a positive value", values);
    }
    Observation::ok(values)
}

/// Heuristic for `Σ a_n < ∞`: the sum over `[P/2, P)` must be clearly
/// smaller than the sum over `[P/4, P/2)`.
pub fn summable_check(a: &[f64]) -> Observation {
    let p = a.len();
    let b1 = sum_over(a, p / 4..p / 2);
    let b2 = sum_over(a, p / 2..p);
    let ratio = if b1 > 0.0 { b2 / b1 } else { 0.0 };
    let values = vec![("partial_sum", a.iter().sum()), ("block_ratio", ratio)];
    if b2 > NEGLIGIBLE && ratio >= BLOCK_RATIO_SUMMABLE {
        Observation::bad(p - 1, "partial sums keep growing linearly or faster", values)
    } else {
        Observation::ok(values)
    }
}

/// Heuristic for `Σ a_n = ∞` on a nonnegative prefix.
pub fn divergent_sum_check(a: &[f64]) -> Observation {
    let p = a.len();
    let b1 = sum_over(a, p / 4..p / 2);
    let b2 = sum_over(a, p / 2..p);
    let ratio = if b1 > 0.0 { b2 / b1 } else { 0.0 };
    let values = vec![("partial_sum", a.iter().sum()), ("block_ratio", ratio)];
    if ratio < BLOCK_RATIO_DIVERGENT {
        Observation::bad(p - 1, "summable, inconsistent with (iii)", values)
    } else {
        Observation::ok(values)
    }
}

fn is_monotone(a: &[f64]) -> bool {
    a.windows(2).all(|w| w[1] <= w[0]) || a.windows(2).all(|w| w[1] >= w[0])
}

fn shifted_differences(a: &[f64], n_shift: usize) -> Vec<f64> {
    (0..a.len().saturating_sub(n_shift))
        .map(|n| (a[n + n_shift] - a[n]).abs())
        .collect()
}

/// Prefix observations for every H3,N item, ignoring certificates.
pub fn h3n_prefix_observations(a: &[f64], n_shift: usize) -> BTreeMap<H3Item, Observation> {
    let mut out = BTreeMap::new();
    let range = match a.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
        Some(i) => Observation::bad(i, format!("α_{i} = {} outside (0,1)", a[i]), vec![]),
        None => Observation::ok(vec![
            ("min", a.iter().copied().fold(f64::INFINITY, f64::min)),
            ("max", a.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        ]),
    };
    out.insert(H3Item::I, range);
    if a.len() < MIN_PREFIX || a.len() <= 2 * n_shift {
        return out;
    }
    let abs: Vec<f64> = a.iter().map(|v| v.abs()).collect();
    out.insert(H3Item::II, decay_check(&abs));
    out.insert(H3Item::III, divergent_sum_check(&abs));
    let diffs = shifted_differences(a, n_shift);
    let iv = if is_monotone(a) {
        Observation::ok(vec![("partial_sum", diffs.iter().sum()), ("monotone", 1.0)])
    } else {
        summable_check(&diffs)
    };
    out.insert(H3Item::Iv, iv);
    let ratio_dev: Vec<f64> = (0..a.len() - n_shift)
        .map(|n| {
            if a[n] == 0.0 {
                f64::INFINITY
            } else {
                (a[n + n_shift] / a[n] - 1.0).abs()
            }
        })
        .collect();
    out.insert(H3Item::IvPrime, decay_check(&ratio_dev));
    out
}

fn record(obs: &mut BTreeMap<String, f64>, prefix: &str, o: &Observation) {
    for (k, v) in &o.values {
        obs.insert(format!("{prefix}.{k}"), *v);
    }
}

fn check_shift_and_prefix(n_shift: usize, prefix: usize) -> Result<()> {
    if n_shift == 0 {
        return Err(Error::invalid("shift N must be at least 1"));
    }
    if prefix < MIN_PREFIX {
        return Err(Error::invalid(format!("prefix must be at least {MIN_PREFIX}")));
    }
    Ok(())
}

/// H3,N for `α` with shift `N`, on the first `prefix` terms (clamped to the
/// length of finite schedules).
pub fn check_h3n(s: &Schedule, n_shift: usize, prefix: usize) -> Result<HypothesisReport> {
    check_shift_and_prefix(n_shift, prefix)?;
    let len = s.len().map_or(prefix, |l| l.min(prefix));
    let a = s.prefix(len)?;
    let heur = h3n_prefix_observations(&a, n_shift);
    let mut observations = BTreeMap::new();
    let mut items = Vec::new();
    for item in H3Item::ALL {
        let certified = s.certifies(item, n_shift);
        let report = match heur.get(&item) {
            Some(o) => {
                record(&mut observations, item.name(), o);
                if certified {
                    ItemReport {
                        item: item.name().into(),
                        verdict: Verdict::Certified,
                        witness: None,
                        note: None,
                    }
                } else if o.violated {
                    ItemReport {
                        item: item.name().into(),
                        verdict: Verdict::Violated,
                        witness: o.witness,
                        note: o.note.clone(),
                    }
                } else {
                    ItemReport {
                        item: item.name().into(),
                        verdict: Verdict::Consistent,
                        witness: None,
                        note: None,
                    }
                }
            }
            None => ItemReport {
                item: item.name().into(),
                verdict: if certified { Verdict::Certified } else { Verdict::Consistent },
                witness: None,
                note: (!certified).then(|| "prefix too short to evaluate".to_string()),
            },
        };
        items.push(report);
    }
    let verdict_of = |i: H3Item| items.iter().find(|r| r.item == i.name()).expect("all items").verdict;
    let core_violated = [H3Item::I, H3Item::II, H3Item::III]
        .iter()
        .any(|i| verdict_of(*i) == Verdict::Violated);
    let tail_violated =
        verdict_of(H3Item::Iv) == Verdict::Violated && verdict_of(H3Item::IvPrime) == Verdict::Violated;
    let fully_certified = [H3Item::I, H3Item::II, H3Item::III]
        .iter()
        .all(|i| verdict_of(*i) == Verdict::Certified)
        && (verdict_of(H3Item::Iv) == Verdict::Certified
            || verdict_of(H3Item::IvPrime) == Verdict::Certified);
    let verdict = if core_violated || tail_violated {
        Verdict::Violated
    } else if fully_certified {
        Verdict::Certified
    } else {
        Verdict::Consistent
    };
    Ok(HypothesisReport {
        hypothesis: "H3,N".into(),
        n_shift,
        mode: if fully_certified {
            ReportMode::Analytic
        } else {
            ReportMode::PrefixHeuristic
        },
        prefix_length: len,
        items,
        observations,
        verdict,
    })
}

/// Prefix observation for a difference condition, ignoring certificates.
pub fn difference_prefix_observation(
    s: &[f64],
    alpha: &[f64],
    n_shift: usize,
    mode: DifferenceMode,
) -> Observation {
    let diffs = shifted_differences(s, n_shift);
    match mode {
        DifferenceMode::Summable => {
            if is_monotone(s) {
                Observation::ok(vec![("partial_sum", diffs.iter().sum()), ("monotone", 1.0)])
            } else {
                summable_check(&diffs)
            }
        }
        DifferenceMode::RatioVanishes => {
            let ratios: Vec<f64> = diffs
                .iter()
                .zip(alpha)
                .map(|(d, a)| if *a > 0.0 { d / a } else { f64::INFINITY })
                .collect();
            decay_check(&ratios)
        }
    }
}

/// `Σ |s_{n+N} - s_n| < ∞` or `|s_{n+N} - s_n| / α_n -> 0`.
///
/// For `r_n >= ε > 0` bounded above, `Σ |1 - r_n/r_{n+1}| < ∞` is equivalent
/// to the summable mode applied to `r`.
pub fn check_difference_condition(
    seq: &Schedule,
    alpha: &Schedule,
    n_shift: usize,
    prefix: usize,
    mode: DifferenceMode,
) -> Result<HypothesisReport> {
    check_shift_and_prefix(n_shift, prefix)?;
    let len = [seq.len(), alpha.len()]
        .into_iter()
        .flatten()
        .fold(prefix, usize::min);
    if len <= n_shift + 2 {
        return Err(Error::invalid("schedules are too short for the requested prefix"));
    }
    let s = seq.prefix(len)?;
    let a = alpha.prefix(len)?;
    let o = difference_prefix_observation(&s, &a, n_shift, mode);
    let certified = seq.certifies_difference(alpha, n_shift, mode);
    let name = match mode {
        DifferenceMode::Summable => "summable",
        DifferenceMode::RatioVanishes => "ratio_vanishes",
    };
    let mut observations = BTreeMap::new();
    record(&mut observations, name, &o);
    let (verdict, witness, note) = if certified {
        (Verdict::Certified, None, None)
    } else if o.violated {
        (Verdict::Violated, o.witness, o.note.clone())
    } else {
        (Verdict::Consistent, None, None)
    };
    Ok(HypothesisReport {
        hypothesis: format!("difference_{name}"),
        n_shift,
        mode: if certified {
            ReportMode::Analytic
        } else {
            ReportMode::PrefixHeuristic
        },
        prefix_length: len,
        items: vec![ItemReport {
            item: name.into(),
            verdict,
            witness,
            note,
        }],
        observations,
        verdict,
    })
}
