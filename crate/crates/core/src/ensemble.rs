//! Ensemble construction and voting.
//!
//! A dimensionality-reduction ensemble trains `K` members, each on its own
//! reduced copy of the training set, and classifies a new point by embedding
//! it with every member's reducer, collecting the members' probability
//! vectors and taking the argmax of their sum. Bagging, AdaBoost.M1 and the
//! diffusion-map + AdaBoost combination share the same member/vote layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dimred::{
    fit_diffusion_map, fit_random_projection, fit_random_subspace, DmParams, ProjectionMode,
    ReducerKind, ReducerModel,
};
use crate::error::{Error, Result};
use crate::inducers::{argmax, train, ClassifierModel, InducerKind, InducerParams};
use crate::linalg::Matrix;

pub const MODEL_FORMAT: &str = "drx-ensemble/1";

/// Stage weight assigned to a round with zero training error, `ln(1e10)`.
pub fn zero_error_stage_weight() -> f64 {
    1e10f64.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Plain,
    Rpe,
    Rse,
    Dme,
    DmeAdaboost,
    Bagging,
    Adaboost,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::Plain,
        Strategy::Rpe,
        Strategy::Rse,
        Strategy::Dme,
        Strategy::DmeAdaboost,
        Strategy::Bagging,
        Strategy::Adaboost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Plain => "plain",
            Strategy::Rpe => "rpe",
            Strategy::Rse => "rse",
            Strategy::Dme => "dme",
            Strategy::DmeAdaboost => "dme-adaboost",
            Strategy::Bagging => "bagging",
            Strategy::Adaboost => "adaboost",
        }
    }

    pub fn reducer(self) -> Option<ReducerKind> {
        match self {
            Strategy::Rpe => Some(ReducerKind::Rp),
            Strategy::Rse => Some(ReducerKind::Rs),
            Strategy::Dme | Strategy::DmeAdaboost => Some(ReducerKind::Dm),
            _ => None,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown ensemble strategy `{s}`")))
    }
}

/// Everything needed to train one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub strategy: Strategy,
    pub inducer: InducerKind,
    pub members: usize,
    /// Reduced dimension as a fraction of the input dimension.
    pub dim_fraction: f64,
    pub dm: DmParams,
    pub projection: ProjectionMode,
    /// AdaBoost rounds (AdaBoost and DM+AdaBoost).
    pub boost_rounds: usize,
    pub inducer_params: InducerParams,
    /// Train members on the rayon pool. Results do not depend on it.
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            strategy: Strategy::Plain,
            inducer: InducerKind::Nn,
            members: 10,
            dim_fraction: 0.5,
            dm: DmParams::default(),
            projection: ProjectionMode::Gaussian,
            boost_rounds: 10,
            inducer_params: InducerParams::default(),
            parallel: true,
        }
    }
}

impl EnsembleConfig {
    pub fn new(strategy: Strategy, inducer: InducerKind) -> Self {
        EnsembleConfig {
            strategy,
            inducer,
            ..EnsembleConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one member".into()));
        }
        if !(self.dim_fraction > 0.0 && self.dim_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "dimension fraction must lie in (0, 1], got {}",
                self.dim_fraction
            )));
        }
        if self.boost_rounds == 0 {
            return Err(Error::InvalidArgument("boosting needs at least one round".into()));
        }
        self.dm.validate()
    }
}

/// `max(1, round(fraction·n))`, capped at `n`.
pub fn target_dim(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).clamp(1, n.max(1))
}

/// Deterministic seed for stream `index` under `master`; injective in `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a Weyl sequence
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn member_rng(member_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(member_seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub classifier: ClassifierModel,
    pub stage_weight: f64,
}

/// AdaBoost.M1 committee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub rounds: Vec<BoostRound>,
    pub class_count: usize,
}

impl BoostedModel {
    /// `Σ_t w_t·p_t / Σ_t w_t`
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.class_count];
        let mut total = 0.0;
        for r in &self.rounds {
            let p = r.classifier.predict_proba(x)?;
            for (a, v) in acc.iter_mut().zip(p) {
                *a += r.stage_weight * v;
            }
            total += r.stage_weight;
        }
        acc.iter_mut().for_each(|a| *a /= total);
        Ok(acc)
    }
}

/// Per-round diagnostics from [`adaboost_m1`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoostTrace {
    /// Weighted training error of every fitted round, including a rejected one.
    pub errors: Vec<f64>,
    /// Sample weights after each accepted reweighting.
    pub weights: Vec<Vec<f64>>,
}

/// AdaBoost.M1 over an arbitrary weighted learner.
///
/// `fit` receives the current sample weights (a distribution) and the round
/// index; `predict` returns the fitted learner's label for training
/// instance `i`. Boosting stops before keeping a round whose weighted error
/// is at least 1/2, and after keeping a round with zero error (stage weight
/// `ln(1e10)`). If the very first round already has error ≥ 1/2 it is kept
/// on its own so the committee is never empty.
pub fn adaboost_m1<C, F, P>(
    labels: &[usize],
    rounds: usize,
    mut fit: F,
    predict: P,
) -> Result<(Vec<(C, f64)>, BoostTrace)>
where
    F: FnMut(&[f64], usize) -> Result<C>,
    P: Fn(&C, usize) -> Result<usize>,
{
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset("boosting needs training instances".into()));
    }
    let mut weights = vec![1.0 / n as f64; n];
    let mut kept: Vec<(C, f64)> = Vec::new();
    let mut trace = BoostTrace::default();

    for t in 0..rounds.max(1) {
        let learner = fit(&weights, t)?;
        let mut miss = vec![false; n];
        let mut error = 0.0;
        for i in 0..n {
            if predict(&learner, i)? != labels[i] {
                miss[i] = true;
                error += weights[i];
            }
        }
        trace.errors.push(error);
        if error >= 0.5 {
            if kept.is_empty() {
                let w = ((1.0 - error) / error.max(1e-10)).ln();
                kept.push((learner, if w > 0.0 { w } else { 1.0 }));
            }
            break;
        }
        if error <= 0.0 {
            kept.push((learner, zero_error_stage_weight()));
            break;
        }
        let beta = (1.0 - error) / error;
        kept.push((learner, beta.ln()));
        for (w, &m) in weights.iter_mut().zip(&miss) {
            if m {
                *w *= beta;
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        trace.weights.push(weights.clone());
    }
    Ok((kept, trace))
}

/// Weighted bootstrap sample of size `weights.len()`.
fn weighted_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cumulative.push(acc);
    }
    (0..weights.len())
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cumulative
                .partition_point(|&c| c <= u)
                .min(weights.len() - 1)
        })
        .collect()
}

/// AdaBoost.M1 with one of the built-in inducers. Nearest-neighbour rounds
/// are trained on a weighted bootstrap resample; the others use the
/// weights directly.
pub fn train_adaboost<R: Rng + ?Sized>(
    features: &Matrix,
    labels: &[usize],
    class_count: usize,
    inducer: InducerKind,
    rounds: usize,
    params: &InducerParams,
    rng: &mut R,
) -> Result<BoostedModel> {
    if class_count < 2 {
        return Err(Error::InvalidArgument("boosting needs at least two classes".into()));
    }
    let fit = |w: &[f64], _t: usize| -> Result<ClassifierModel> {
        if inducer.supports_weights() {
            train(inducer, features, labels, class_count, Some(w), params)
        } else {
            let idx = weighted_resample(w, rng);
            let sample_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            train(inducer, &features.select_rows(&idx), &sample_labels, class_count, None, params)
        }
    };
    let predict = |c: &ClassifierModel, i: usize| c.predict(features.row(i));
    let (kept, _) = adaboost_m1(labels, rounds, fit, predict)?;
    Ok(BoostedModel {
        rounds: kept
            .into_iter()
            .map(|(classifier, stage_weight)| BoostRound {
                classifier,
                stage_weight,
            })
            .collect(),
        class_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MemberClassifier {
    Single(ClassifierModel),
    Boosted(BoostedModel),
}

impl MemberClassifier {
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            MemberClassifier::Single(c) => c.predict_proba(x),
            MemberClassifier::Boosted(b) => b.predict_proba(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub reducer: Option<ReducerModel>,
    pub classifier: MemberClassifier,
    pub member_seed: u64,
}

impl Member {
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.reducer {
            Some(r) => self.classifier.predict_proba(&r.embed(x)?),
            None => self.classifier.predict_proba(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub strategy: Strategy,
    pub inducer: InducerKind,
    pub class_count: usize,
    pub input_dim: usize,
    pub members: Vec<Member>,
}

/// Sums member probability vectors in member order. Returns the argmax of
/// the sum (lowest index on ties) and the sum normalized to a distribution.
pub fn aggregate_votes(member_probs: &[Vec<f64>]) -> (usize, Vec<f64>) {
    let c = member_probs.first().map_or(0, Vec::len);
    let mut sums = vec![0.0; c];
    for p in member_probs {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    let winner = argmax(&sums);
    let total: f64 = sums.iter().sum();
    if total > 0.0 {
        sums.iter_mut().for_each(|s| *s /= total);
    }
    (winner, sums)
}

impl EnsembleModel {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Member-wise probability vectors for one point.
    pub fn member_probas(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim {
            return Err(Error::Arity {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        self.members.iter().map(|m| m.predict_proba(x)).collect()
    }

    /// Ensemble decision and aggregated class distribution for one point.
    pub fn classify(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        Ok(aggregate_votes(&self.member_probas(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
        }
        let h: Header = serde_json::from_str(s)?;
        if h.format != MODEL_FORMAT {
            return Err(Error::Version {
                expected: MODEL_FORMAT.into(),
                found: h.format,
            });
        }
        Ok(serde_json::from_str(s)?)
    }
}

fn run_members<F>(k: usize, parallel: bool, build: F) -> Result<Vec<Member>>
where
    F: Fn(usize) -> Result<Member> + Sync + Send,
{
    let wrap = |i: usize| {
        build(i).map_err(|e| Error::Member {
            index: i,
            source: Box::new(e),
        })
    };
    if parallel {
        (0..k).into_par_iter().map(wrap).collect()
    } else {
        (0..k).map(wrap).collect()
    }
}

fn check_dataset(d: &Dataset) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataset(d.name.clone()));
    }
    if d.n_features() == 0 {
        return Err(Error::InvalidArgument("dataset has no features".into()));
    }
    Ok(())
}

fn single_classifier(
    cfg: &EnsembleConfig,
    boosted: bool,
    features: &Matrix,
    labels: &[usize],
    class_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<MemberClassifier> {
    if boosted {
        train_adaboost(
            features,
            labels,
            class_count,
            cfg.inducer,
            cfg.boost_rounds,
            &cfg.inducer_params,
            rng,
        )
        .map(MemberClassifier::Boosted)
    } else {
        train(cfg.inducer, features, labels, class_count, None, &cfg.inducer_params)
            .map(MemberClassifier::Single)
    }
}

/// Each member reduces the training set with its own randomly drawn
/// reducer and trains the inducer on the result. With `boosted`, the
/// member classifier is an AdaBoost.M1 committee on the reduced set.
fn train_reduced(
    d: &Dataset,
    reducer: ReducerKind,
    boosted: bool,
    cfg: &EnsembleConfig,
    master_seed: u64,
) -> Result<Vec<Member>> {
    let n = d.n_features();
    let q = target_dim(n, cfg.dim_fraction);
    run_members(cfg.members, cfg.parallel, |i| {
        let member_seed = derive_seed(master_seed, i as u64);
        let mut rng = member_rng(member_seed);
        let model = match reducer {
            ReducerKind::Dm => ReducerModel::DiffusionMap(Box::new(fit_diffusion_map(
                &d.features,
                q,
                &cfg.dm,
                &mut rng,
            )?)),
            ReducerKind::Rp => {
                ReducerModel::Projection(fit_random_projection(n, q, cfg.projection, &mut rng)?)
            }
            ReducerKind::Rs => ReducerModel::Subspace(fit_random_subspace(n, q, &mut rng)?),
        };
        let reduced = model.embed_training(&d.features)?;
        let classifier = single_classifier(cfg, boosted, &reduced, &d.labels, d.n_classes(), &mut rng)?;
        Ok(Member {
            reducer: Some(model),
            classifier,
            member_seed,
        })
    })
}

fn assemble(cfg: &EnsembleConfig, d: &Dataset, members: Vec<Member>) -> EnsembleModel {
    EnsembleModel {
        format: MODEL_FORMAT.into(),
        strategy: cfg.strategy,
        inducer: cfg.inducer,
        class_count: d.n_classes(),
        input_dim: d.n_features(),
        members,
    }
}

/// Dimensionality-reduction ensemble with `cfg.members` members. Member `i`
/// draws all of its randomness from [`derive_seed`]`(master_seed, i)`, so
/// the result does not depend on `cfg.parallel`.
pub fn train_dr_ensemble(
    d: &Dataset,
    reducer: ReducerKind,
    cfg: &EnsembleConfig,
    master_seed: u64,
) -> Result<EnsembleModel> {
    cfg.validate()?;
    check_dataset(d)?;
    let members = train_reduced(d, reducer, false, cfg, master_seed)?;
    Ok(assemble(cfg, d, members))
}

/// Diffusion-map ensemble whose members boost the inducer on their reduced
/// training sets.
pub fn train_multi_strategy_dm_adaboost(
    d: &Dataset,
    cfg: &EnsembleConfig,
    master_seed: u64,
) -> Result<EnsembleModel> {
    cfg.validate()?;
    check_dataset(d)?;
    let members = train_reduced(d, ReducerKind::Dm, true, cfg, master_seed)?;
    Ok(assemble(cfg, d, members))
}

/// Bootstrap sample of `n` indices drawn with replacement.
pub fn bootstrap_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

pub fn train_bagging(d: &Dataset, cfg: &EnsembleConfig, master_seed: u64) -> Result<EnsembleModel> {
    cfg.validate()?;
    check_dataset(d)?;
    let members = run_members(cfg.members, cfg.parallel, |i| {
        let member_seed = derive_seed(master_seed, i as u64);
        let mut rng = member_rng(member_seed);
        let idx = bootstrap_indices(d.len(), &mut rng);
        let sample = d.subset(&idx);
        let classifier = train(
            cfg.inducer,
            &sample.features,
            &sample.labels,
            d.n_classes(),
            None,
            &cfg.inducer_params,
        )?;
        Ok(Member {
            reducer: None,
            classifier: MemberClassifier::Single(classifier),
            member_seed,
        })
    })?;
    Ok(assemble(cfg, d, members))
}

/// Trains whatever `cfg.strategy` names.
pub fn train_ensemble(d: &Dataset, cfg: &EnsembleConfig, master_seed: u64) -> Result<EnsembleModel> {
    cfg.validate()?;
    check_dataset(d)?;
    match cfg.strategy {
        Strategy::Rpe => train_dr_ensemble(d, ReducerKind::Rp, cfg, master_seed),
        Strategy::Rse => train_dr_ensemble(d, ReducerKind::Rs, cfg, master_seed),
        Strategy::Dme => train_dr_ensemble(d, ReducerKind::Dm, cfg, master_seed),
        Strategy::DmeAdaboost => train_multi_strategy_dm_adaboost(d, cfg, master_seed),
        Strategy::Bagging => train_bagging(d, cfg, master_seed),
        Strategy::Plain | Strategy::Adaboost => {
            let member_seed = derive_seed(master_seed, 0);
            let mut rng = member_rng(member_seed);
            let boosted = cfg.strategy == Strategy::Adaboost;
            let classifier =
                single_classifier(cfg, boosted, &d.features, &d.labels, d.n_classes(), &mut rng)
                    .map_err(|e| Error::Member {
                        index: 0,
                        source: Box::new(e),
                    })?;
            let member = Member {
                reducer: None,
                classifier,
                member_seed,
            };
            Ok(assemble(cfg, d, vec![member]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_gaussian_blobs;
    use crate::dimred::SubspaceModel;
    use crate::inducers::TreeNode;

    fn leaf_member(proba: Vec<f64>) -> Member {
        Member {
            reducer: None,
            classifier: MemberClassifier::Single(ClassifierModel::Tree {
                class_count: proba.len(),
                nodes: vec![TreeNode::Leaf { proba }],
            }),
            member_seed: 0,
        }
    }

    fn ensemble_of(probas: Vec<Vec<f64>>) -> EnsembleModel {
        EnsembleModel {
            format: MODEL_FORMAT.into(),
            strategy: Strategy::Rpe,
            inducer: InducerKind::Tree,
            class_count: probas[0].len(),
            input_dim: 1,
            members: probas.into_iter().map(leaf_member).collect(),
        }
    }

    #[test]
    fn voting_examples() {
        let e = ensemble_of(vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
        let (c, p) = e.classify(&[0.0]).unwrap();
        assert_eq!(c, 1);
        assert!((p[0] - 0.45).abs() < 1e-15 && (p[1] - 0.55).abs() < 1e-15);

        let e = ensemble_of(vec![vec![0.0, 0.0, 1.0]; 3]);
        assert_eq!(e.classify(&[0.0]).unwrap(), (2, vec![0.0, 0.0, 1.0]));

        let e = ensemble_of(vec![vec![0.5, 0.5]]);
        assert_eq!(e.classify(&[0.0]).unwrap().0, 0);
        assert!(matches!(e.classify(&[0.0, 1.0]), Err(Error::Arity { .. })));
    }

    #[test]
    fn seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn target_dim_rounding() {
        assert_eq!(target_dim(4, 0.5), 2);
        assert_eq!(target_dim(7, 0.5), 4);
        assert_eq!(target_dim(1, 0.5), 1);
        assert_eq!(target_dim(3, 0.1), 1);
        assert_eq!(target_dim(3, 1.0), 3);
    }

    #[test]
    fn stage_weight_for_quarter_error() {
        // 4 instances, the learner always misses instance 0
        let labels = [0, 0, 0, 0];
        let (kept, trace) = adaboost_m1(
            &labels,
            1,
            |_, _| Ok(()),
            |_, i| Ok(usize::from(i == 0)),
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert!((kept[0].1 - 3f64.ln()).abs() < 1e-12);
        assert!((kept[0].1 - 1.0986).abs() < 1e-4);
        // 0.25·3 = 0.75 against 3·0.25 for the rest, then renormalized
        let w = &trace.weights[0];
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!(w[1..].iter().all(|v| (v - 0.5 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn boosting_stops_on_perfect_round() {
        let d = make_gaussian_blobs(10, 2, 2, 0.05, 1).unwrap();
        let mut rng = member_rng(1);
        let b = train_adaboost(&d.features, &d.labels, 2, InducerKind::Tree, 10, &InducerParams::default(), &mut rng)
            .unwrap();
        assert_eq!(b.rounds.len(), 1);
        assert_eq!(b.rounds[0].stage_weight, zero_error_stage_weight());
    }

    #[test]
    fn weak_first_round_falls_back_to_single_member() {
        let labels = [0, 1, 0, 1];
        let (kept, trace) = adaboost_m1(&labels, 5, |_, _| Ok(()), |_, _| Ok(0)).unwrap();
        assert_eq!(kept.len(), 1);
        assert!(kept[0].1 > 0.0);
        assert_eq!(trace.errors, vec![0.5]);
    }

    #[test]
    fn boosted_prediction_matches_resummation() {
        let d = make_gaussian_blobs(30, 2, 3, 1.2, 7).unwrap();
        let mut rng = member_rng(3);
        let b = train_adaboost(&d.features, &d.labels, 3, InducerKind::Nb, 10, &InducerParams::default(), &mut rng)
            .unwrap();
        assert!(b.rounds.iter().all(|r| r.stage_weight > 0.0));
        for i in [0, 17, 33, 61, 89] {
            let x = d.features.row(i);
            let mut direct = [0.0; 3];
            for r in &b.rounds {
                let p = r.classifier.predict_proba(x).unwrap();
                for k in 0..3 {
                    direct[k] += r.stage_weight * p[k];
                }
            }
            let p = b.predict_proba(x).unwrap();
            assert_eq!(argmax(&p), argmax(&direct));
        }
    }

    #[test]
    fn bootstrap_single_instance() {
        let d = make_gaussian_blobs(1, 2, 1, 1.0, 0).unwrap();
        let mut rng = member_rng(0);
        assert_eq!(bootstrap_indices(1, &mut rng), vec![0]);
        let cfg = EnsembleConfig::new(Strategy::Bagging, InducerKind::Nn);
        let e = train_bagging(&d, &cfg, 5).unwrap();
        for m in &e.members {
            let MemberClassifier::Single(ClassifierModel::Nn { points, .. }) = &m.classifier else {
                panic!("expected nn member")
            };
            assert_eq!(points, &d.features);
        }
    }

    #[test]
    fn bootstrap_unique_fraction() {
        let mut rng = member_rng(11);
        let n = 1000;
        let draws = 200;
        let mut total = 0.0;
        for _ in 0..draws {
            let mut seen = vec![false; n];
            for i in bootstrap_indices(n, &mut rng) {
                seen[i] = true;
            }
            total += seen.iter().filter(|&&s| s).count() as f64 / n as f64;
        }
        let mean = total / draws as f64;
        // 1 − (1 − 1/n)^n
        let expected = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
        assert!((mean - expected).abs() < 0.005, "{mean} vs {expected}");
        assert!((expected - 0.632).abs() < 0.001);
    }

    #[test]
    fn bagging_is_reproducible() {
        let d = make_gaussian_blobs(15, 3, 2, 1.0, 2).unwrap();
        let cfg = EnsembleConfig::new(Strategy::Bagging, InducerKind::Tree);
        assert_eq!(train_bagging(&d, &cfg, 9).unwrap(), train_bagging(&d, &cfg, 9).unwrap());
    }

    #[test]
    fn full_subspace_single_member_matches_plain() {
        let d = make_gaussian_blobs(20, 4, 3, 1.0, 3).unwrap();
        for inducer in [InducerKind::Nn, InducerKind::Nb] {
            let mut cfg = EnsembleConfig::new(Strategy::Rse, inducer);
            cfg.members = 1;
            cfg.dim_fraction = 1.0;
            let e = train_dr_ensemble(&d, ReducerKind::Rs, &cfg, 4).unwrap();
            let Some(ReducerModel::Subspace(SubspaceModel { indices, .. })) = &e.members[0].reducer else {
                panic!("expected subspace reducer")
            };
            assert_eq!(indices.len(), 4);
            let plain = train(inducer, &d.features, &d.labels, 3, None, &InducerParams::default()).unwrap();
            let test = make_gaussian_blobs(10, 4, 3, 1.5, 99).unwrap();
            for x in test.features.row_iter() {
                assert_eq!(e.classify(x).unwrap().0, plain.predict(x).unwrap());
            }
        }
    }

    #[test]
    fn single_round_boosting_matches_plain_dm() {
        let d = make_gaussian_blobs(25, 4, 2, 0.6, 5).unwrap();
        let mut cfg = EnsembleConfig::new(Strategy::DmeAdaboost, InducerKind::Nb);
        cfg.members = 4;
        cfg.boost_rounds = 1;
        let boosted = train_multi_strategy_dm_adaboost(&d, &cfg, 12).unwrap();
        let plain = train_dr_ensemble(&d, ReducerKind::Dm, &cfg, 12).unwrap();
        let test = make_gaussian_blobs(10, 4, 2, 0.8, 6).unwrap();
        for x in test.features.row_iter() {
            assert_eq!(boosted.classify(x).unwrap().0, plain.classify(x).unwrap().0);
        }
    }

    #[test]
    fn serialization_round_trip_and_version_check() {
        let d = make_gaussian_blobs(12, 4, 2, 1.0, 8).unwrap();
        let cfg = EnsembleConfig::new(Strategy::Rpe, InducerKind::Tree);
        let e = train_ensemble(&d, &cfg, 1).unwrap();
        let json = e.to_json().unwrap();
        assert_eq!(EnsembleModel::from_json(&json).unwrap(), e);
        let bad = json.replacen(MODEL_FORMAT, "drx-ensemble/0", 1);
        assert!(matches!(EnsembleModel::from_json(&bad), Err(Error::Version { .. })));
    }

    #[test]
    fn member_failures_name_the_member() {
        let d = Dataset::new(
            "same",
            Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(),
            vec![0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let cfg = EnsembleConfig::new(Strategy::Dme, InducerKind::Nn);
        match train_ensemble(&d, &cfg, 0) {
            Err(Error::Member { index, source }) => {
                assert_eq!(index, 0);
                assert!(matches!(*source, Error::Degenerate(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn argmax_ignores_common_scaling(
                probas in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 4), 1..6),
                scale in 0.1f64..10.0,
            ) {
                let scaled: Vec<Vec<f64>> = probas.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
                let (a, _) = aggregate_votes(&probas);
                let (b, _) = aggregate_votes(&scaled);
                // exact ties may split differently after rounding; compare sums directly
                let sums: Vec<f64> = (0..4).map(|k| probas.iter().map(|p| p[k]).sum()).collect();
                let gap = (sums[a] - sums[b]).abs();
                prop_assert!(a == b || gap < 1e-12);
            }

            #[test]
            fn boosting_weights_stay_distributions(seed in any::<u64>()) {
                let d = make_gaussian_blobs(15, 2, 2, 1.5, seed).unwrap();
                let fit = |w: &[f64], _| train(InducerKind::Tree, &d.features, &d.labels, 2, Some(w), &InducerParams { min_leaf: 6, ..InducerParams::default() });
                let predict = |c: &ClassifierModel, i: usize| c.predict(d.features.row(i));
                let (_, trace) = adaboost_m1(&d.labels, 10, fit, predict).unwrap();
                for w in &trace.weights {
                    prop_assert!(w.iter().all(|&v| v >= 0.0));
                    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
