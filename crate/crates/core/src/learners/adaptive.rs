//! The optimistically universal self-adaptive rule.
//!
//! Stage `i` is admissible at `(n, m)` when every pair `(f, g)` of `F_i`
//! satisfies
//!
//! ```text
//! max_{u_i <= s <= m} A_s(f, g) - max_{u_i <= s <= n} A_s(f, g) <= gamma_i
//! ```
//!
//! where `A_s` is the average pairwise loss over the first `s` points. The
//! selected stage is the largest admissible one with `u_i <= n`.
//!
//! A pair only enters through its loss on each finest cell, so pairs are
//! collapsed to distinct loss profiles. Each profile remembers the smallest
//! class size at which some pair realizing it is present; profiles are stored
//! in that order, so the profiles present in `F_i` form a prefix.
//!
//! Both maxima are maintained incrementally. The left one covers `(n, m]` and
//! only grows with `m`; the right one covers `[u_i, n]` and only grows as the
//! stage decreases. Since the gap can only grow with `m`, a stage that failed
//! once never becomes admissible again, and the search resumes from the
//! current stage instead of the top.

use std::sync::Arc;

use rustc_hash::FxHashSet;

use crate::classes::{ClassSchedule, FunctionClass};
use crate::error::{LabError, Result};
use crate::exec::Exec;
use crate::spaces::{LossSpace, Point, Value};

use super::basic::first_within;
use super::schedule::ScheduleParams;
use super::{check_sample, SelfAdaptiveRule};

/// Distinct nonzero pairwise loss profiles of a class prefix.
#[derive(Debug, Clone)]
pub struct PairProfiles {
    cells: usize,
    data: Vec<f64>,
    /// Smallest class size containing a pair with this profile; ascending.
    first_size: Vec<usize>,
}

impl PairProfiles {
    pub fn build(class: &FunctionClass, members: usize, space: &LossSpace, exec: Exec) -> Self {
        let cells = class.indexer().cells();
        // Chunks of the later-member index are scanned independently; merging
        // them in order keeps the earliest occurrence of each profile.
        let chunk = 64usize;
        let chunks = members.div_ceil(chunk);
        let local: Vec<Vec<(usize, Box<[u64]>)>> = exec.map_range(chunks, |ci| {
            let mut seen: FxHashSet<Box<[u64]>> = FxHashSet::default();
            let mut out = Vec::new();
            let mut buf = vec![0u64; cells];
            for b in ci * chunk..((ci + 1) * chunk).min(members) {
                let rb = class.row(b);
                for a in 0..b {
                    let ra = class.row(a);
                    let mut nonzero = false;
                    for c in 0..cells {
                        let l = space.eval(ra[c], rb[c]);
                        nonzero |= l != 0.0;
                        buf[c] = l.to_bits();
                    }
                    if nonzero && !seen.contains(&buf[..]) {
                        let key: Box<[u64]> = buf.clone().into_boxed_slice();
                        seen.insert(key.clone());
                        out.push((b + 1, key));
                    }
                }
            }
            out
        });
        let mut seen: FxHashSet<Box<[u64]>> = FxHashSet::default();
        let mut data = Vec::new();
        let mut first_size = Vec::new();
        for (size, key) in local.into_iter().flatten() {
            if !seen.contains(&key) {
                data.extend(key.iter().map(|&b| f64::from_bits(b)));
                first_size.push(size);
                seen.insert(key);
            }
        }
        PairProfiles {
            cells,
            data,
            first_size,
        }
    }

    pub fn len(&self) -> usize {
        self.first_size.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_size.is_empty()
    }

    /// Number of profiles realized by pairs within the first `size` members.
    pub fn present(&self, size: usize) -> usize {
        self.first_size.partition_point(|&s| s <= size)
    }

    #[inline]
    fn loss(&self, p: usize, cell: usize) -> f64 {
        self.data[p * self.cells + cell]
    }
}

/// Class, schedules and pair profiles shared by every session of the rule.
#[derive(Debug)]
pub struct AdaptiveModel {
    params: ScheduleParams,
    classes: ClassSchedule,
    space: LossSpace,
    lbar: f64,
    class: FunctionClass,
    profiles: PairProfiles,
    max_labels: usize,
    exec: Exec,
}

impl AdaptiveModel {
    /// Prepares the rule for up to `max_labels` labeled points.
    pub fn new(
        params: ScheduleParams,
        classes: ClassSchedule,
        space: LossSpace,
        max_labels: usize,
        exec: Exec,
    ) -> Result<Self> {
        params.validate(&space)?;
        let lbar = space.sup_loss();
        if !lbar.is_finite() {
            return Err(LabError::config(
                "learner.rule",
                "the self-adaptive rule needs a bounded loss; use the unbounded rule",
            ));
        }
        let top = params.top_stage(max_labels as u64)?;
        let size = classes.size(top as usize)?;
        let class = FunctionClass::from_members(classes.space, classes.values, classes.members(size)?)?;
        let profiles = PairProfiles::build(&class, size, &space, exec);
        Ok(AdaptiveModel {
            params,
            classes,
            space,
            lbar,
            class,
            profiles,
            max_labels,
            exec,
        })
    }

    pub fn class(&self) -> &FunctionClass {
        &self.class
    }

    pub fn profiles(&self) -> &PairProfiles {
        &self.profiles
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    fn size(&self, stage: u64) -> usize {
        self.classes.size(stage as usize).expect("stage sizes were checked at construction")
    }

    fn u(&self, stage: u64) -> usize {
        self.params.u.at(stage) as usize
    }

    /// Opens a session on the labeled sample `(xs, ys)`.
    pub fn session(self: &Arc<Self>, xs: &[Point], ys: &[Value]) -> Result<AdaptiveSession> {
        AdaptiveSession::new(Arc::clone(self), xs, ys)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PairStat {
    ahead_cum: f64,
    ahead_max: f64,
    back_cum: f64,
    back_max: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct FnStat {
    back_cum: f64,
    back_max: f64,
}

/// State of the rule after `n` labels and `m >= n` points.
///
/// Labels are accepted once, at construction; later points arrive without
/// labels through [`AdaptiveSession::observe`].
#[derive(Debug, Clone)]
pub struct AdaptiveSession {
    model: Arc<AdaptiveModel>,
    n: usize,
    labels: Vec<Value>,
    cells: Vec<u32>,
    stage: u64,
    /// `u_stage`, the start of the right-hand window.
    back_pos: usize,
    pairs: Vec<PairStat>,
    fns: Vec<FnStat>,
    fn_back_pos: usize,
    chosen: Option<(u64, usize)>,
}

impl AdaptiveSession {
    fn new(model: Arc<AdaptiveModel>, xs: &[Point], ys: &[Value]) -> Result<Self> {
        check_sample(xs, ys)?;
        let n = xs.len();
        if n > model.max_labels {
            return Err(LabError::usage(format!(
                "rule prepared for at most {} labels, got {n}",
                model.max_labels
            )));
        }
        let idx = model.class.indexer();
        let cells: Vec<u32> = xs.iter().map(|x| idx.cell_of(x) as u32).collect();
        let mut s = AdaptiveSession {
            model,
            n,
            labels: ys.to_vec(),
            cells,
            stage: 1,
            back_pos: 1,
            pairs: Vec::new(),
            fns: Vec::new(),
            fn_back_pos: 1,
            chosen: None,
        };
        if n == 0 {
            s.chosen = Some((1, 0));
            return Ok(s);
        }
        let m = &s.model;
        let top = m.params.top_stage(n as u64)?;
        let u = m.u(top);
        let live = m.profiles.present(m.size(top));
        let prof = &m.profiles;
        let cells = &s.cells;
        s.pairs = m.exec.map_range(live, |p| {
            let mut cum = 0.0;
            let mut at_u = 0.0;
            let mut best = f64::NEG_INFINITY;
            for (t, &c) in cells.iter().enumerate() {
                cum += prof.loss(p, c as usize);
                if t + 1 == u {
                    at_u = cum;
                }
                if t + 1 >= u {
                    best = best.max(cum / (t + 1) as f64);
                }
            }
            PairStat {
                ahead_cum: cum,
                ahead_max: f64::NEG_INFINITY,
                back_cum: at_u,
                back_max: best,
            }
        });
        let class = &m.class;
        let space = &m.space;
        let labels = &s.labels;
        s.fns = m.exec.map_range(m.size(top), |j| {
            let row = class.row(j);
            let mut cum = 0.0;
            let mut at_u = 0.0;
            let mut best = f64::NEG_INFINITY;
            for (t, (&c, &y)) in cells.iter().zip(labels).enumerate() {
                cum += space.eval(row[c as usize], y);
                if t + 1 == u {
                    at_u = cum;
                }
                if t + 1 >= u {
                    best = best.max(cum / (t + 1) as f64);
                }
            }
            FnStat {
                back_cum: at_u,
                back_max: best,
            }
        });
        s.stage = top;
        s.back_pos = u;
        s.fn_back_pos = u;
        s.settle();
        Ok(s)
    }

    /// Number of labeled points.
    pub fn labeled(&self) -> usize {
        self.n
    }

    /// Number of points seen, labeled or not.
    pub fn seen(&self) -> usize {
        self.cells.len()
    }

    /// The selected stage `i_hat(n, m)`.
    pub fn index(&self) -> u64 {
        self.stage
    }

    /// Appends the unlabeled point `x_{m+1}`.
    pub fn observe(&mut self, x: &Point) {
        let c = self.model.class.indexer().cell_of(x);
        self.cells.push(c as u32);
        if self.n == 0 {
            return;
        }
        let m = self.cells.len() as f64;
        let live = self.model.profiles.present(self.model.size(self.stage));
        let prof = &self.model.profiles;
        self.model.exec.for_each_mut(&mut self.pairs[..live], |p, st| {
            st.ahead_cum += prof.loss(p, c);
            st.ahead_max = st.ahead_max.max(st.ahead_cum / m);
        });
        self.settle();
    }

    fn admissible(&self, stage: u64) -> bool {
        let live = self.model.profiles.present(self.model.size(stage));
        let gamma = self.model.params.gamma.at(stage, self.model.lbar);
        self.pairs[..live]
            .iter()
            .all(|st| st.back_max.max(st.ahead_max) - st.back_max <= gamma)
    }

    /// Lowers the stage until it is admissible.
    fn settle(&mut self) {
        while self.stage > 1 && !self.admissible(self.stage) {
            self.stage -= 1;
            self.sweep_pairs();
        }
    }

    /// Extends the right-hand window of the live pairs down to `u_stage`.
    fn sweep_pairs(&mut self) {
        let u = self.model.u(self.stage);
        if u >= self.back_pos {
            return;
        }
        let live = self.model.profiles.present(self.model.size(self.stage));
        let (from, prof, cells) = (self.back_pos, &self.model.profiles, &self.cells);
        self.model.exec.for_each_mut(&mut self.pairs[..live], |p, st| {
            for s in (u..from).rev() {
                st.back_cum -= prof.loss(p, cells[s] as usize);
                st.back_max = st.back_max.max(st.back_cum / s as f64);
            }
        });
        self.back_pos = u;
    }

    /// Index of the selected member of `F_stage`.
    pub fn chosen(&mut self) -> usize {
        if let Some((stage, j)) = self.chosen {
            if stage == self.stage {
                return j;
            }
        }
        let m = &self.model;
        let size = m.size(self.stage);
        let u = m.u(self.stage);
        if u < self.fn_back_pos {
            let (from, class, space, cells, labels) = (self.fn_back_pos, &m.class, &m.space, &self.cells, &self.labels);
            // Sums of dyadic losses are exact, so subtracting reproduces the
            // forward prefix sums; other label values may differ in the last ulp.
            m.exec.for_each_mut(&mut self.fns[..size], |j, st| {
                let row = class.row(j);
                for s in (u..from).rev() {
                    st.back_cum -= space.eval(row[cells[s] as usize], labels[s]);
                    st.back_max = st.back_max.max(st.back_cum / s as f64);
                }
            });
            self.fn_back_pos = u;
        }
        let risks: Vec<f64> = self.fns[..size].iter().map(|f| f.back_max).collect();
        let j = first_within(&risks, m.params.epsilon.at(self.n as u64));
        self.chosen = Some((self.stage, j));
        j
    }

    /// Prediction at `x` by the member selected for the current `(n, m)`.
    pub fn predict(&mut self, x: &Point) -> Value {
        let j = self.chosen();
        self.model.class.eval(j, x)
    }
}

/// `i_hat(n, m)` on the points `xs[..m]` with the first `n` treated as labeled.
pub fn sual_index(
    xs: &[Point],
    n: usize,
    m: usize,
    params: &ScheduleParams,
    classes: &ClassSchedule,
    space: &LossSpace,
) -> Result<u64> {
    if n > m || m > xs.len() {
        return Err(LabError::usage(format!("need n <= m <= len, got n={n}, m={m}, len={}", xs.len())));
    }
    let model = Arc::new(AdaptiveModel::new(*params, classes.clone(), *space, n, Exec::Sequential)?);
    // labels do not affect the stage
    let mut s = model.session(&xs[..n], &vec![0.0; n])?;
    for x in &xs[n..m] {
        s.observe(x);
    }
    Ok(s.index())
}

/// Prediction of the self-adaptive rule at `x` with labels `ys[..n]` and points `xs[..m]`.
#[allow(clippy::too_many_arguments)]
pub fn sual_predict(
    xs: &[Point],
    ys: &[Value],
    n: usize,
    m: usize,
    x: &Point,
    params: &ScheduleParams,
    classes: &ClassSchedule,
    space: &LossSpace,
) -> Result<Value> {
    if n > m || m > xs.len() || n > ys.len() {
        return Err(LabError::usage(format!("need n <= m <= len, got n={n}, m={m}, len={}", xs.len())));
    }
    let model = Arc::new(AdaptiveModel::new(*params, classes.clone(), *space, n, Exec::Sequential)?);
    let mut s = model.session(&xs[..n], &ys[..n])?;
    for p in &xs[n..m] {
        s.observe(p);
    }
    Ok(s.predict(x))
}

/// [`SelfAdaptiveRule`] backed by a shared model.
#[derive(Debug, Clone)]
pub struct SelfAdaptive {
    model: Arc<AdaptiveModel>,
    session: Option<AdaptiveSession>,
}

impl SelfAdaptive {
    pub fn new(model: Arc<AdaptiveModel>) -> Self {
        SelfAdaptive { model, session: None }
    }

    pub fn session(&self) -> Option<&AdaptiveSession> {
        self.session.as_ref()
    }
}

impl SelfAdaptiveRule for SelfAdaptive {
    fn name(&self) -> &'static str {
        "self_adaptive"
    }

    fn fit(&mut self, xs: &[Point], ys: &[Value]) -> Result<()> {
        self.session = Some(self.model.session(xs, ys)?);
        Ok(())
    }

    fn observe(&mut self, x: &Point) -> Result<()> {
        self.session
            .as_mut()
            .ok_or_else(|| LabError::Protocol("observe before fit".into()))?
            .observe(x);
        Ok(())
    }

    fn predict(&mut self, x: &Point) -> Result<Value> {
        Ok(self
            .session
            .as_mut()
            .ok_or_else(|| LabError::Protocol("predict before fit".into()))?
            .predict(x))
    }
}
