//! Epoch loop: structure denoising, mini-batch joint loss, Adam updates,
//! ablation switches and validation-based early stopping.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::{adam_step, AdamConfig, OptimizerState};
use crate::data::{DatasetSplit, Edge};
use crate::denoise::{denoise_interaction, denoise_social, social_enhance, DenoiseReport, DenoiseThresholds};
use crate::encoder::{propagate_interaction, EmbeddingState};
use crate::error::{Error, Result};
use crate::eval::evaluate_all_ranking;
use crate::graph::{EdgeMask, InteractionGraph, SocialNetwork};
use crate::matrix::Matrix;
use crate::objective::{joint_loss, BatchSample, ClLoss, JointInputs, LossBreakdown, LossWeights, Perturbation};
use crate::perturb::PerturbMode;

/// Validation cutoff used for early stopping.
pub const VALIDATION_K: usize = 20;

const INIT_STREAM: u64 = 0;
const VALIDATION_STREAM: u64 = 1;
/// Epoch `e` (0-based) draws its batches, negatives and noise from stream `EPOCH_STREAM_BASE + e`.
pub const EPOCH_STREAM_BASE: u64 = 16;
const NEGATIVE_ATTEMPTS: usize = 1000;

/// Which parts of the model are switched off. Combinations are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Ablation {
    /// Interaction-domain denoising, both the graph pruning and the
    /// interaction-side contrastive terms (RD).
    pub no_interaction_denoise: bool,
    /// Graph pruning in both domains (SD).
    pub no_structure_denoise: bool,
    /// All contrastive terms (ED).
    pub no_embedding_denoise: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        no_interaction_denoise: false,
        no_structure_denoise: false,
        no_embedding_denoise: false,
    };

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    fn prunes_social(&self) -> bool {
        !self.no_structure_denoise
    }

    fn prunes_interactions(&self) -> bool {
        !self.no_structure_denoise && !self.no_interaction_denoise
    }

    /// Loss weights with the switched-off contrastive terms zeroed.
    pub fn effective_weights(&self, w: &LossWeights) -> LossWeights {
        let mut w = *w;
        if self.no_embedding_denoise {
            w.lambda1 = 0.0;
            w.lambda2 = 0.0;
            w.lambda3 = 0.0;
        }
        if self.no_interaction_denoise {
            w.lambda1 = 0.0;
            w.lambda3 = 0.0;
        }
        w
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_full() {
            return f.write_str("full");
        }
        let parts: Vec<&str> = [
            (self.no_interaction_denoise, "rd"),
            (self.no_structure_denoise, "sd"),
            (self.no_embedding_denoise, "ed"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|&(_, name)| name)
        .collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for Ablation {
    type Err = Error;

    /// `full`, or one or more of `rd`, `sd`, `ed` joined by `+`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let mut out = Ablation::FULL;
        if s == "full" {
            return Ok(out);
        }
        for part in s.split('+') {
            match part.trim() {
                "rd" => out.no_interaction_denoise = true,
                "sd" => out.no_structure_denoise = true,
                "ed" => out.no_embedding_denoise = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown ablation '{other}' (expected full, rd, sd, ed or a '+' combination)"
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub thresholds: DenoiseThresholds,
    pub weights: LossWeights,
    pub epsilon: f64,
    pub layers: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub ablation: Ablation,
    pub perturb_mode: PerturbMode,
    pub cl_loss: ClLoss,
    /// Hold out part of each user's training edges for early stopping.
    /// When off, exactly `max_epochs` epochs run and the final state wins.
    pub validation: bool,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            thresholds: DenoiseThresholds::default(),
            weights: LossWeights::default(),
            epsilon: 0.1,
            layers: 2,
            dim: 50,
            batch_size: 2048,
            learning_rate: 1e-3,
            adam: AdamConfig::default(),
            max_epochs: 500,
            patience: 10,
            seed: 2024,
            ablation: Ablation::FULL,
            perturb_mode: PerturbMode::Collaborative,
            cl_loss: ClLoss::AcInfoNce,
            validation: true,
            validation_fraction: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.weights.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return bad("embedding width must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad("perturbation magnitude must be finite and non-negative");
        }
        let a = &self.adam;
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        if self.validation && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Xavier-uniform tables with bound `sqrt(3 / d)` and zeroed moments.
pub fn initialize(config: &TrainConfig, user_count: usize, item_count: usize) -> Result<(EmbeddingState, OptimizerState)> {
    config.validate()?;
    let d = config.dim;
    let bound = (3.0 / d as f64).sqrt();
    let mut rng = stream_rng(config.seed, INIT_STREAM);
    let mut table = |rows: usize| {
        let data = (0..rows * d).map(|_| rng.random_range(-bound..=bound)).collect();
        Matrix::from_vec(rows, d, data)
    };
    let users = table(user_count)?;
    let items = table(item_count)?;
    let state = EmbeddingState::new(users, items)?;
    let opt = OptimizerState::new(&state);
    Ok((state, opt))
}

/// ChaCha8 seeded with `seed`, on its own stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shuffle the positive edges and cut them into batches; one negative per
/// triple, drawn uniformly from items outside `known` for that user.
pub fn sample_epoch_batches<R: Rng + ?Sized>(
    positives: &InteractionGraph,
    known: &InteractionGraph,
    batch_size: usize,
    rng: &mut R,
) -> Vec<BatchSample> {
    let mut order: Vec<usize> = (0..positives.edge_count()).collect();
    order.shuffle(rng);
    let item_count = known.item_count();
    order
        .chunks(batch_size.max(1))
        .map(|chunk| {
            let mut users = Vec::with_capacity(chunk.len());
            let mut pos = Vec::with_capacity(chunk.len());
            let mut neg = Vec::with_capacity(chunk.len());
            for &e in chunk {
                let (u, i) = positives.edges()[e];
                let mut j = rng.random_range(0..item_count) as u32;
                for _ in 0..NEGATIVE_ATTEMPTS {
                    if !known.has_edge(u as usize, j) {
                        break;
                    }
                    j = rng.random_range(0..item_count) as u32;
                }
                users.push(u);
                pos.push(i);
                neg.push(j);
            }
            BatchSample::new(users, pos, neg)
        })
        .collect()
}

/// Everything one epoch produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub epoch: usize,
    pub losses: LossBreakdown,
    pub report: DenoiseReport,
}

/// Model state plus the graphs it trains on.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    interaction: Arc<InteractionGraph>,
    social: Arc<SocialNetwork>,
    interaction_flags: Vec<bool>,
    social_flags: Vec<bool>,
    state: EmbeddingState,
    optimizer: OptimizerState,
    denoised: Arc<InteractionGraph>,
    interaction_mask: EdgeMask,
    epoch: usize,
}

/// Resumable trainer state. The graphs are rebuilt from the data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerSnapshot {
    pub epoch: usize,
    pub state: EmbeddingState,
    pub optimizer: OptimizerState,
    pub interaction_mask: EdgeMask,
}

impl Trainer {
    /// `interaction_flags`/`social_flags` mark injected noise for auditing
    /// only; pass empty slices when unknown.
    pub fn new(
        config: TrainConfig,
        interaction: InteractionGraph,
        social: SocialNetwork,
        interaction_flags: Vec<bool>,
        social_flags: Vec<bool>,
    ) -> Result<Self> {
        config.validate()?;
        if social.user_count() != interaction.user_count() {
            return Err(Error::Shape("social network and interaction graph disagree on user count".into()));
        }
        if interaction.edge_count() == 0 {
            return Err(Error::Graph("no training interactions".into()));
        }
        let flags_ok = |f: &[bool], n: usize| f.is_empty() || f.len() == n;
        if !flags_ok(&interaction_flags, interaction.edge_count()) || !flags_ok(&social_flags, social.edge_count()) {
            return Err(Error::Shape("noise flags do not match the edge lists".into()));
        }
        let (state, optimizer) = initialize(&config, interaction.user_count(), interaction.item_count())?;
        let interaction = Arc::new(interaction);
        let mask = EdgeMask::all(interaction.edge_count());
        Ok(Trainer {
            config,
            denoised: Arc::clone(&interaction),
            interaction,
            social: Arc::new(social),
            interaction_flags,
            social_flags,
            state,
            optimizer,
            interaction_mask: mask,
            epoch: 0,
        })
    }

    /// Trainer over all training edges of `split` (no validation holdout).
    pub fn from_split(config: TrainConfig, split: &DatasetSplit) -> Result<Self> {
        let interaction = InteractionGraph::new(&split.train, split.user_count, split.item_count)?;
        let social = SocialNetwork::new(&split.social, split.user_count)?;
        Self::new(
            config,
            interaction,
            social,
            split.train_fabricated.clone(),
            split.social_fabricated.clone(),
        )
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn state(&self) -> &EmbeddingState {
        &self.state
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn interaction_graph(&self) -> &InteractionGraph {
        &self.interaction
    }

    pub fn social_network(&self) -> &SocialNetwork {
        &self.social
    }

    /// The interaction graph of the last epoch (the original before any).
    pub fn denoised_interactions(&self) -> &InteractionGraph {
        &self.denoised
    }

    pub fn interaction_mask(&self) -> &EdgeMask {
        &self.interaction_mask
    }

    /// Propagated `(P_U, P_I)` used for scoring.
    pub fn scoring_embeddings(&self) -> Result<(Matrix, Matrix)> {
        scoring_embeddings(&self.state, &self.denoised, self.config.layers)
    }

    pub fn snapshot(&self) -> TrainerSnapshot {
        TrainerSnapshot {
            epoch: self.epoch,
            state: self.state.clone(),
            optimizer: self.optimizer.clone(),
            interaction_mask: self.interaction_mask.clone(),
        }
    }

    pub fn restore(&mut self, snap: TrainerSnapshot) -> Result<()> {
        if snap.state.users.shape() != self.state.users.shape() || snap.state.items.shape() != self.state.items.shape() {
            return Err(Error::Shape("snapshot tables do not match the dataset".into()));
        }
        if snap.interaction_mask.len() != self.interaction.edge_count() {
            return Err(Error::Shape("snapshot mask does not match the interaction graph".into()));
        }
        self.denoised = Arc::new(self.interaction.apply_mask(&snap.interaction_mask)?);
        self.interaction_mask = snap.interaction_mask;
        self.state = snap.state;
        self.optimizer = snap.optimizer;
        self.epoch = snap.epoch;
        Ok(())
    }

    fn flags(f: &[bool]) -> Option<&[bool]> {
        (!f.is_empty()).then_some(f)
    }

    /// Denoise both graphs from the originals using embeddings propagated
    /// over the previous epoch's interaction graph.
    fn denoise(&self) -> Result<(Arc<InteractionGraph>, EdgeMask, Arc<SocialNetwork>, DenoiseReport)> {
        let cfg = &self.config;
        let mut report = DenoiseReport {
            social_edges: self.social.edge_count(),
            interaction_edges: self.interaction.edge_count(),
            flagged_noise: self.interaction_flags.iter().filter(|&&f| f).count(),
            flagged_social: self.social_flags.iter().filter(|&&f| f).count(),
            ..Default::default()
        };
        let untouched = || (Arc::clone(&self.interaction), EdgeMask::all(self.interaction.edge_count()));
        if !cfg.ablation.prunes_social() {
            let (graph, mask) = untouched();
            return Ok((graph, mask, Arc::clone(&self.social), report));
        }
        let h = propagate_interaction(&self.state, &self.denoised, cfg.layers)?;
        let (social, _, srep) = denoise_social(&self.social, &h, &cfg.thresholds, Self::flags(&self.social_flags))?;
        report.social_edges_removed = srep.social_edges_removed;
        report.removed_flagged_social = srep.removed_flagged_social;
        report.pc_histogram = srep.pc_histogram;
        if !cfg.ablation.prunes_interactions() {
            let (graph, mask) = untouched();
            return Ok((graph, mask, Arc::new(social), report));
        }
        let enhanced = social_enhance(&h, &social);
        let (graph, mask, irep) = denoise_interaction(
            &self.interaction,
            &enhanced,
            &h,
            &cfg.thresholds,
            Self::flags(&self.interaction_flags),
        )?;
        report.interaction_edges_removed = irep.interaction_edges_removed;
        report.removed_flagged_noise = irep.removed_flagged_noise;
        report.ic_histogram = irep.ic_histogram;
        if graph.edge_count() == 0 {
            return Err(Error::Config(format!(
                "denoising removed every interaction edge at epoch {} (beta_r = {}); lower the thresholds",
                self.epoch + 1,
                cfg.thresholds.beta_r
            )));
        }
        Ok((Arc::new(graph), mask, Arc::new(social), report))
    }

    pub fn run_epoch(&mut self) -> Result<EpochOutcome> {
        let (graph, mask, social, report) = self.denoise()?;
        let cfg = self.config.clone();
        let weights = cfg.ablation.effective_weights(&cfg.weights);
        let mut rng = stream_rng(cfg.seed, EPOCH_STREAM_BASE + self.epoch as u64);
        let batches = sample_epoch_batches(&graph, &self.interaction, cfg.batch_size, &mut rng);

        let mut losses = LossBreakdown::default();
        for batch in &batches {
            let inputs = JointInputs {
                state: &self.state,
                interaction: &graph,
                social: &social,
                layers: cfg.layers,
                batch,
                weights: &weights,
                cl_loss: cfg.cl_loss,
                epsilon: cfg.epsilon,
            };
            let perturbation = if cfg.ablation.no_embedding_denoise {
                Perturbation::Disabled
            } else {
                Perturbation::Sampled(cfg.perturb_mode, &mut rng)
            };
            let out = joint_loss(&inputs, perturbation)?;
            losses.accumulate(&out.parts);
            adam_step(
                &mut self.state,
                &out.grad_users,
                &out.grad_items,
                &mut self.optimizer,
                cfg.learning_rate,
                &cfg.adam,
            )?;
        }
        if !self.state.is_finite() {
            return Err(Error::Numerical(format!("non-finite embeddings after epoch {}", self.epoch + 1)));
        }
        self.denoised = graph;
        self.interaction_mask = mask;
        self.epoch += 1;
        Ok(EpochOutcome {
            epoch: self.epoch,
            losses,
            report,
        })
    }
}

/// Propagate `state` over `graph` and return the pooled tables.
pub fn scoring_embeddings(state: &EmbeddingState, graph: &InteractionGraph, layers: usize) -> Result<(Matrix, Matrix)> {
    let p = propagate_interaction(state, graph, layers)?;
    let items = p.items()?.clone();
    Ok((p.users, items))
}

/// Split each user's training edges into kept and held-out parts.
/// Users keep at least one training edge.
pub fn validation_holdout(train: &[Edge], user_count: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_user: Vec<Vec<usize>> = vec![Vec::new(); user_count];
    for (e, &(u, _)) in train.iter().enumerate() {
        by_user[u as usize].push(e);
    }
    let mut rng = stream_rng(seed, VALIDATION_STREAM);
    let mut held = Vec::new();
    for edges in by_user.iter_mut() {
        let n = edges.len();
        let k = ((n as f64 * fraction).round() as usize).min(n.saturating_sub(1));
        edges.shuffle(&mut rng);
        held.extend_from_slice(&edges[..k]);
    }
    held.sort_unstable();
    let mut is_held = vec![false; train.len()];
    held.iter().for_each(|&e| is_held[e] = true);
    let kept = (0..train.len()).filter(|&e| !is_held[e]).collect();
    (kept, held)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub losses: LossBreakdown,
    pub report: DenoiseReport,
    pub val_recall: Option<f64>,
    pub wall_seconds: f64,
}

impl EpochRecord {
    /// One tab-separated log line. With `timing` off the wall-clock column
    /// is written as 0 so logs compare byte for byte.
    pub fn to_tsv(&self, timing: bool) -> String {
        let val = self.val_recall.map_or_else(|| "nan".to_string(), |v| v.to_string());
        let wall = if timing { self.wall_seconds } else { 0.0 };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
            self.epoch,
            self.losses.bpr,
            self.losses.cl_interaction,
            self.losses.cl_social,
            self.losses.cl_item,
            self.report.social_edges_removed,
            self.report.interaction_edges_removed,
            val,
            wall
        )
    }
}

pub const LOG_HEADER: &str =
    "epoch\tbpr_loss\tcl_r\tcl_s\tcl_i\tsocial_removed\tinteraction_removed\tval_recall@20\twall_seconds";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_tsv(&self, timing: bool) -> String {
        let mut s = format!("{LOG_HEADER}\n");
        for r in &self.records {
            s.push_str(&r.to_tsv(timing));
            s.push('\n');
        }
        s
    }
}

/// Best-so-far bookkeeping for early stopping.
#[derive(Debug, Clone, PartialEq)]
pub struct BestCheckpoint {
    pub epoch: usize,
    pub metric: f64,
    pub state: EmbeddingState,
    pub interaction_mask: EdgeMask,
}

/// A training run in progress: trainer, validation view, early stopping.
#[derive(Debug, Clone)]
pub struct TrainingSession {
    trainer: Trainer,
    validation: Vec<Edge>,
    best: Option<BestCheckpoint>,
    since_improvement: usize,
    log: TrainingLog,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation state, or the final state without validation.
    pub state: EmbeddingState,
    /// Mask over the trainer's interaction graph matching `state`.
    pub interaction_mask: EdgeMask,
    /// The trainer's interaction edges (training minus validation).
    pub train_edges: Vec<Edge>,
    pub best_epoch: usize,
    pub best_metric: Option<f64>,
    pub log: TrainingLog,
    pub layers: usize,
}

impl TrainOutcome {
    /// Interaction edges kept at the returned state's epoch.
    pub fn scoring_edges(&self) -> Vec<Edge> {
        self.train_edges
            .iter()
            .zip(self.interaction_mask.flags())
            .filter(|(_, &k)| k)
            .map(|(&e, _)| e)
            .collect()
    }

    pub fn scoring_embeddings(&self, user_count: usize, item_count: usize) -> Result<(Matrix, Matrix)> {
        let graph = InteractionGraph::new(&self.scoring_edges(), user_count, item_count)?;
        scoring_embeddings(&self.state, &graph, self.layers)
    }
}

impl TrainingSession {
    pub fn new(config: TrainConfig, split: &DatasetSplit) -> Result<Self> {
        config.validate()?;
        if !config.validation {
            return Ok(TrainingSession {
                trainer: Trainer::from_split(config, split)?,
                validation: Vec::new(),
                best: None,
                since_improvement: 0,
                log: TrainingLog::default(),
            });
        }
        let (kept, held) = validation_holdout(&split.train, split.user_count, config.validation_fraction, config.seed);
        let pick = |ids: &[usize], v: &[Edge]| ids.iter().map(|&e| v[e]).collect::<Vec<_>>();
        let flags: Vec<bool> = if split.train_fabricated.is_empty() {
            Vec::new()
        } else {
            kept.iter().map(|&e| split.train_fabricated[e]).collect()
        };
        let interaction = InteractionGraph::new(&pick(&kept, &split.train), split.user_count, split.item_count)?;
        let social = SocialNetwork::new(&split.social, split.user_count)?;
        let trainer = Trainer::new(config, interaction, social, flags, split.social_fabricated.clone())?;
        Ok(TrainingSession {
            trainer,
            validation: pick(&held, &split.train),
            best: None,
            since_improvement: 0,
            log: TrainingLog::default(),
        })
    }

    pub fn trainer(&self) -> &Trainer {
        &self.trainer
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn best(&self) -> Option<&BestCheckpoint> {
        self.best.as_ref()
    }

    pub fn since_improvement(&self) -> usize {
        self.since_improvement
    }

    pub fn validation_edges(&self) -> &[Edge] {
        &self.validation
    }

    pub fn is_finished(&self) -> bool {
        let cfg = self.trainer.config();
        self.trainer.epoch() >= cfg.max_epochs || (cfg.validation && self.since_improvement >= cfg.patience.max(1))
    }

    /// Recall@20 on the held-out edges, scored over the current graph.
    pub fn validation_recall(&self) -> Result<Option<f64>> {
        if self.validation.is_empty() {
            return Ok(None);
        }
        let (pu, pi) = self.trainer.scoring_embeddings()?;
        let report = evaluate_all_ranking(&pu, &pi, self.trainer.interaction_graph().edges(), &self.validation, &[VALIDATION_K])?;
        Ok(Some(report.recall[0]))
    }

    /// Run one epoch and update early-stopping state.
    pub fn step(&mut self) -> Result<&EpochRecord> {
        let start = Instant::now();
        let outcome = self.trainer.run_epoch()?;
        let val_recall = if self.trainer.config().validation {
            self.validation_recall()?
        } else {
            None
        };
        if let Some(metric) = val_recall {
            let improved = self.best.as_ref().is_none_or(|b| metric > b.metric);
            if improved {
                self.best = Some(BestCheckpoint {
                    epoch: outcome.epoch,
                    metric,
                    state: self.trainer.state().clone(),
                    interaction_mask: self.trainer.interaction_mask().clone(),
                });
                self.since_improvement = 0;
            } else {
                self.since_improvement += 1;
            }
        }
        self.log.records.push(EpochRecord {
            epoch: outcome.epoch,
            losses: outcome.losses,
            report: outcome.report,
            val_recall,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.log.records.last().expect("just pushed"))
    }

    pub fn finish(self) -> TrainOutcome {
        let layers = self.trainer.config().layers;
        let train_edges = self.trainer.interaction_graph().edges().to_vec();
        match self.best {
            Some(b) => TrainOutcome {
                state: b.state,
                interaction_mask: b.interaction_mask,
                train_edges,
                best_epoch: b.epoch,
                best_metric: Some(b.metric),
                log: self.log,
                layers,
            },
            None => TrainOutcome {
                state: self.trainer.state().clone(),
                interaction_mask: self.trainer.interaction_mask().clone(),
                train_edges,
                best_epoch: self.trainer.epoch(),
                best_metric: None,
                log: self.log,
                layers,
            },
        }
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            trainer: self.trainer.snapshot(),
            best: self.best.clone(),
            since_improvement: self.since_improvement,
            log: self.log.clone(),
        }
    }

    pub fn restore(&mut self, snap: SessionSnapshot) -> Result<()> {
        self.trainer.restore(snap.trainer)?;
        self.best = snap.best;
        self.since_improvement = snap.since_improvement;
        self.log = snap.log;
        Ok(())
    }
}

/// Everything needed to continue a session bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSnapshot {
    pub trainer: TrainerSnapshot,
    pub best: Option<BestCheckpoint>,
    pub since_improvement: usize,
    pub log: TrainingLog,
}

impl SessionSnapshot {
    /// The same snapshot with every recorded wall time set to zero.
    pub fn without_timing(mut self) -> Self {
        self.log.records.iter_mut().for_each(|r| r.wall_seconds = 0.0);
        self
    }
}

/// Train until early stopping or `max_epochs`, calling `on_epoch` after each.
pub fn train_with<F>(config: TrainConfig, split: &DatasetSplit, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochRecord) -> Result<()>,
{
    let mut session = TrainingSession::new(config, split)?;
    while !session.is_finished() {
        let record = session.step()?;
        on_epoch(record)?;
    }
    Ok(session.finish())
}

pub fn train(config: TrainConfig, split: &DatasetSplit) -> Result<TrainOutcome> {
    train_with(config, split, |_| Ok(()))
}
