//! C ABI over the dcdsr engine.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free`. Every fallible call returns a [`DcdsrStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`dcdsr_last_error`]. Paths and configuration text are UTF-8 C strings.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dcdsr::checkpoint::{load_edges, load_embeddings, save_edges, save_embeddings, CheckpointMeta};
use dcdsr::config::{apply_setting, config_hash, parse_settings};
use dcdsr::data::{load_edge_lists, read_split, split_train_test, DatasetSplit};
use dcdsr::eval::{evaluate_split, rank_user};
use dcdsr::graph::InteractionGraph;
use dcdsr::matrix::Matrix;
use dcdsr::trainer::{scoring_embeddings, train, TrainConfig};
use dcdsr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcdsrStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Numerical = 4,
    InvalidUtf8 = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A loaded train/test split.
pub struct DcdsrSplit {
    inner: DatasetSplit,
}

/// Trained or loaded embeddings plus the graph they are scored over.
pub struct DcdsrModel {
    state: dcdsr::encoder::EmbeddingState,
    scoring_edges: Vec<(u32, u32)>,
    layers: usize,
    meta: CheckpointMeta,
    users: Matrix,
    items: Matrix,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> DcdsrStatus {
    match err.exit_code() {
        2 => DcdsrStatus::Config,
        4 => DcdsrStatus::Numerical,
        _ => DcdsrStatus::Data,
    }
}

enum Fail {
    Status(DcdsrStatus, String),
    Engine(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Engine(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DcdsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DcdsrStatus::Ok
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(&msg);
            s
        }
        Ok(Err(Fail::Engine(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            DcdsrStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail::Status(DcdsrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Status(DcdsrStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(null(what))
    } else {
        Ok(())
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn dcdsr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dcdsr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Read a split directory written by `dcdsr split` or `dcdsr train`.
///
/// # Safety
/// `dir` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_split_load(dir: *const c_char, out: *mut *mut DcdsrSplit) -> DcdsrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let dir = text(dir, "dir")?;
        let inner = read_split(Path::new(dir))?;
        *out = Box::into_raw(Box::new(DcdsrSplit { inner }));
        Ok(())
    })
}

/// Load raw edge lists and split each user's interactions by `ratio`.
///
/// # Safety
/// Both paths must be valid C strings and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_split_from_edge_lists(
    interactions: *const c_char,
    social: *const c_char,
    ratio: f64,
    seed: u64,
    out: *mut *mut DcdsrSplit,
) -> DcdsrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let raw = load_edge_lists(Path::new(text(interactions, "interactions")?), Path::new(text(social, "social")?))?;
        let inner = split_train_test(&raw, ratio, seed)?;
        *out = Box::into_raw(Box::new(DcdsrSplit { inner }));
        Ok(())
    })
}

/// # Safety
/// `split` must come from a `dcdsr_split_*` constructor, or be null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_split_free(split: *mut DcdsrSplit) {
    if !split.is_null() {
        drop(Box::from_raw(split));
    }
}

/// Number of users, or 0 for a null handle.
///
/// # Safety
/// `split` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_split_user_count(split: *const DcdsrSplit) -> usize {
    split.as_ref().map_or(0, |s| s.inner.user_count)
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `split` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_split_item_count(split: *const DcdsrSplit) -> usize {
    split.as_ref().map_or(0, |s| s.inner.item_count)
}

fn build_model(
    state: dcdsr::encoder::EmbeddingState,
    scoring_edges: Vec<(u32, u32)>,
    layers: usize,
    meta: CheckpointMeta,
) -> Result<DcdsrModel, Fail> {
    let graph = InteractionGraph::new(&scoring_edges, state.user_count(), state.item_count())?;
    let (users, items) = scoring_embeddings(&state, &graph, layers)?;
    Ok(DcdsrModel {
        state,
        scoring_edges,
        layers,
        meta,
        users,
        items,
    })
}

/// Train on `split`. `config` holds `key = value` lines in the config-file
/// syntax and may be null for the defaults.
///
/// # Safety
/// `split` must be a live handle, `config` a valid C string or null, and
/// `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_train(
    split: *const DcdsrSplit,
    config: *const c_char,
    out: *mut *mut DcdsrModel,
) -> DcdsrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let split = &handle(split, "split")?.inner;
        let mut cfg = TrainConfig::default();
        if !config.is_null() {
            for (k, v) in parse_settings(text(config, "config")?, Path::new("<config>"))? {
                apply_setting(&mut cfg, &k, &v)?;
            }
        }
        let outcome = train(cfg.clone(), split)?;
        let meta = CheckpointMeta {
            config_hash: config_hash(&cfg),
            epoch: outcome.best_epoch,
            metric: outcome.best_metric,
            layers: cfg.layers,
        };
        let edges = outcome.scoring_edges();
        let model = build_model(outcome.state, edges, cfg.layers, meta)?;
        *out = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// Load `model.bin` with its sibling `model.meta` and `scoring_edges.txt`
/// when present; otherwise score over the split's training edges with 2 layers.
///
/// # Safety
/// `checkpoint` must be a valid C string, `split` a live handle, and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_load(
    checkpoint: *const c_char,
    split: *const DcdsrSplit,
    out: *mut *mut DcdsrModel,
) -> DcdsrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = Path::new(text(checkpoint, "checkpoint")?);
        let split = &handle(split, "split")?.inner;
        let state = load_embeddings(path)?;
        if state.user_count() != split.user_count || state.item_count() != split.item_count {
            return Err(Error::Shape("checkpoint and split disagree on user or item count".into()).into());
        }
        let meta_path = path.with_extension("meta");
        let meta = if meta_path.exists() {
            CheckpointMeta::load(&meta_path)?
        } else {
            CheckpointMeta { config_hash: String::new(), epoch: 0, metric: None, layers: 2 }
        };
        let edges_path = path.with_file_name("scoring_edges.txt");
        let edges = if edges_path.exists() { load_edges(&edges_path)? } else { split.train.clone() };
        let layers = meta.layers;
        *out = Box::into_raw(Box::new(build_model(state, edges, layers, meta)?));
        Ok(())
    })
}

/// Write `model.bin`, `model.meta` and `scoring_edges.txt` into `dir`,
/// which must exist.
///
/// # Safety
/// `model` must be a live handle and `dir` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_save(model: *const DcdsrModel, dir: *const c_char) -> DcdsrStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let dir = Path::new(text(dir, "dir")?);
        save_embeddings(&dir.join("model.bin"), &model.state)?;
        model.meta.save(&dir.join("model.meta"))?;
        save_edges(&dir.join("scoring_edges.txt"), &model.scoring_edges)?;
        Ok(())
    })
}

/// # Safety
/// `model` must come from `dcdsr_train` or `dcdsr_model_load`, or be null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_free(model: *mut DcdsrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Embedding width, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_dim(model: *const DcdsrModel) -> usize {
    model.as_ref().map_or(0, |m| m.state.dim())
}

/// Propagation depth the model scores with, or 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_layers(model: *const DcdsrModel) -> usize {
    model.as_ref().map_or(0, |m| m.layers)
}

/// Predicted preference of internal user `user` for internal item `item`.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_score(model: *const DcdsrModel, user: u32, item: u32, out: *mut f64) -> DcdsrStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let m = handle(model, "model")?;
        let (u, i) = (user as usize, item as usize);
        if u >= m.users.rows() || i >= m.items.rows() {
            return Err(Fail::Status(DcdsrStatus::OutOfRange, format!("user {user} or item {item} out of range")));
        }
        *out = m.users.row(u).iter().zip(m.items.row(i)).map(|(a, b)| a * b).sum();
        Ok(())
    })
}

/// Top-`k` internal item ids for `user`, excluding its training items.
/// Writes at most `k` ids into `items` and their number into `written`.
///
/// # Safety
/// `model` and `split` must be live handles, `items` must have room for
/// `k` values, and `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_model_recommend(
    model: *const DcdsrModel,
    split: *const DcdsrSplit,
    user: u32,
    k: usize,
    items: *mut u32,
    written: *mut usize,
) -> DcdsrStatus {
    guard(|| {
        out_ptr(written, "written")?;
        let m = handle(model, "model")?;
        let s = &handle(split, "split")?.inner;
        if k > 0 {
            out_ptr(items, "items")?;
        }
        if user as usize >= m.users.rows() {
            return Err(Fail::Status(DcdsrStatus::OutOfRange, format!("user {user} out of range")));
        }
        let mut known: Vec<u32> = s.train.iter().filter(|e| e.0 == user).map(|e| e.1).collect();
        known.sort_unstable();
        let top = rank_user(&m.users, &m.items, user as usize, &known, k);
        if !top.is_empty() {
            ptr::copy_nonoverlapping(top.as_ptr(), items, top.len());
        }
        *written = top.len();
        Ok(())
    })
}

/// All-ranking Recall@`k` and NDCG@`k` on the split's test edges.
///
/// # Safety
/// `model` and `split` must be live handles; `recall` and `ndcg` writable.
#[no_mangle]
pub unsafe extern "C" fn dcdsr_evaluate(
    model: *const DcdsrModel,
    split: *const DcdsrSplit,
    k: usize,
    recall: *mut f64,
    ndcg: *mut f64,
) -> DcdsrStatus {
    guard(|| {
        out_ptr(recall, "recall")?;
        out_ptr(ndcg, "ndcg")?;
        let m = handle(model, "model")?;
        let s = &handle(split, "split")?.inner;
        let report = evaluate_split(&m.users, &m.items, s, &[k])?;
        *recall = report.recall[0];
        *ndcg = report.ndcg[0];
        Ok(())
    })
}
