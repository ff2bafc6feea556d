//! File-level pipeline steps: extract, train, predict, fuse, eval.
//!
//! Directory conventions:
//!
//! * model directory: `scaler.csv`, `ranking_<target>.csv`,
//!   `svr_<target>.model`, `selection_<target>.csv`
//! * prediction directory: `<target>/<model>.csv` with
//!   `utterance_id,prediction` rows; the model name is the file stem
//! * fusion output: `<target>/smlr.csv` plus `smlr_weights_<target>.csv`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{self, FrameConfig, Split, Target, Utterance};
use crate::dsp::PitchConfig;
use crate::error::{Error, Result};
use crate::features::{feature_names, ExtractorConfig, FeatureExtractor, N_FEATURES};
use crate::fusion::{self, PredictionSet};
use crate::metrics;
use crate::preprocess::{self, ScalerParams};
use crate::relieff::{self, FeatureRanking, RReliefFParams};
use crate::svr::{self, GammaSpec, KernelKind, LabeledSet, SvrGrid, SvrModel};

pub const AUDIO_MODEL_NAME: &str = "svr_audio";
pub const FUSED_MODEL_NAME: &str = "smlr";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub extractor: ExtractorConfig,
    pub relieff: RReliefFParams,
    pub grid: SvrGrid,
    pub percentile_low: f64,
    pub percentile_high: f64,
    pub exclude_arousal: Vec<String>,
    pub exclude_valence: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            extractor: ExtractorConfig::default(),
            relieff: RReliefFParams::default(),
            grid: SvrGrid::default(),
            percentile_low: 2.0,
            percentile_high: 98.0,
            exclude_arousal: Vec::new(),
            exclude_valence: Vec::new(),
        }
    }
}

fn list<T>(value: &str, parse: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

impl PipelineConfig {
    pub fn exclusions(&self, target: Target) -> &[String] {
        match target {
            Target::Arousal => &self.exclude_arousal,
            Target::Valence => &self.exclude_valence,
        }
    }

    pub fn exclusions_mut(&mut self, target: Target) -> &mut Vec<String> {
        match target {
            Target::Arousal => &mut self.exclude_arousal,
            Target::Valence => &mut self.exclude_valence,
        }
    }

    /// Parses a flat `key = value` file on top of the defaults. `#` starts a
    /// comment; list values are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidParameter(format!("config line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::InvalidParameter(format!("config `{key}`: bad value `{value}`"));
        let num = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "window_len" => self.extractor.frame.window_len = int()?,
            "hop" => self.extractor.frame.hop = int()?,
            "band_split_hz" => self.extractor.band_split_hz = num()?,
            "pre_emphasis" => self.extractor.pre_emphasis = num()?,
            "pitch_min_hz" => self.extractor.pitch.min_hz = num()?,
            "pitch_max_hz" => self.extractor.pitch.max_hz = num()?,
            "voicing_threshold" => self.extractor.pitch.voicing_threshold = num()?,
            "formant_max_bandwidth_hz" => self.extractor.formant.max_bandwidth_hz = num()?,
            "formant_min_hz" => self.extractor.formant.min_hz = num()?,
            "relieff_k" => self.relieff.k = int()?,
            "relieff_sigma" => self.relieff.sigma = num()?,
            "relieff_m" => {
                self.relieff.m = if value == "all" { None } else { Some(int()?) }
            }
            "seed" => self.relieff.seed = value.parse().map_err(|_| bad())?,
            "percentile_low" => self.percentile_low = num()?,
            "percentile_high" => self.percentile_high = num()?,
            "svr_k_grid" => self.grid.k_values = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
            "svr_c_grid" => self.grid.c_values = list(value, |s| s.parse().ok()).ok_or_else(bad)?,
            "svr_epsilon_grid" => {
                self.grid.epsilon_values = list(value, |s| s.parse().ok()).ok_or_else(bad)?
            }
            "svr_gamma_grid" => {
                self.grid.gamma_values = list(value, |s| match s {
                    "1/d" => Some(GammaSpec::InverseDim),
                    other => other.parse().ok().map(GammaSpec::Fixed),
                })
                .ok_or_else(bad)?
            }
            "svr_kernels" => {
                self.grid.kernels = list(value, |s| match s {
                    "linear" => Some(KernelKind::Linear),
                    "rbf" => Some(KernelKind::Rbf),
                    _ => None,
                })
                .ok_or_else(bad)?
            }
            "exclude_arousal" => self.exclude_arousal = list(value, |s| Some(s.to_string())).unwrap_or_default(),
            "exclude_valence" => self.exclude_valence = list(value, |s| Some(s.to_string())).unwrap_or_default(),
            _ => return Err(Error::InvalidParameter(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        FrameConfig::new(self.extractor.frame.window_len, self.extractor.frame.hop)?;
        PitchConfig::validate(&self.extractor.pitch)?;
        if !(0.0..=100.0).contains(&self.percentile_low)
            || !(self.percentile_low..=100.0).contains(&self.percentile_high)
        {
            return Err(Error::InvalidParameter("percentile bounds".into()));
        }
        if self.relieff.k == 0 || !(self.relieff.sigma > 0.0) || self.relieff.m == Some(0) {
            return Err(Error::InvalidParameter("RReliefF parameters".into()));
        }
        Ok(())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(contents.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Utterance ids with their 76-feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut s = String::from("utterance_id");
        for name in feature_names() {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (id, row) in self.ids.iter().zip(&self.rows) {
            s.push_str(id);
            for v in row {
                s.push(',');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        write_file(path.as_ref(), &s)
    }

    /// Reads a feature CSV. The column count must match the header; the
    /// header is not otherwise required to carry the standard names.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path)?;
        let width = reader.headers()?.len();
        if width < 2 {
            return Err(Error::format(path, "feature file has no feature columns"));
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::format(path, format!("bad number in row `{}`", &rec[0])))?;
            ids.push(rec[0].to_string());
            rows.push(row);
        }
        Ok(Self { ids, rows })
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    fn check_width(&self, expected: usize) -> Result<()> {
        match self.rows.iter().find(|r| r.len() != expected) {
            Some(r) => Err(Error::DimensionMismatch {
                expected,
                got: r.len(),
            }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractReport {
    pub table: FeatureTable,
    /// Ids whose audio could not be read or analysed, with the reason.
    pub skipped: Vec<(String, String)>,
}

pub fn extract_utterances(utterances: &[Utterance], cfg: &ExtractorConfig) -> Result<ExtractReport> {
    let extractor = FeatureExtractor::new(*cfg, dataset::CANONICAL_RATE)?;
    let results: Vec<(String, Result<Vec<f64>>)> = utterances
        .par_iter()
        .map(|u| {
            let row = dataset::read_wav(&u.wav_path)
                .and_then(|sig| extractor.extract(&sig))
                .map(|v| v.0.to_vec());
            (u.id.clone(), row)
        })
        .collect();
    let mut table = FeatureTable {
        ids: Vec::new(),
        rows: Vec::new(),
    };
    let mut skipped = Vec::new();
    for (id, r) in results {
        match r {
            Ok(row) => {
                table.ids.push(id);
                table.rows.push(row);
            }
            Err(e) => {
                log::error!("skipping `{id}`: {e}");
                skipped.push((id, e.to_string()));
            }
        }
    }
    Ok(ExtractReport { table, skipped })
}

/// `extract`: one 76-feature row per readable utterance of the manifest.
pub fn extract(manifest: &Path, out: &Path, cfg: &PipelineConfig) -> Result<ExtractReport> {
    let utterances = dataset::load_manifest(manifest)?;
    let report = extract_utterances(&utterances, &cfg.extractor)?;
    report.table.save(out)?;
    Ok(report)
}

fn labeled_rows(
    table: &FeatureTable,
    utterances: &[Utterance],
    split: Split,
    target: Target,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let by_id: HashMap<&str, usize> = table
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for u in utterances.iter().filter(|u| u.split == split) {
        let Some(&row) = by_id.get(u.id.as_str()) else {
            log::warn!("no features for {split} utterance `{}`", u.id);
            continue;
        };
        let label = u.label(target).ok_or_else(|| {
            Error::Contract(format!("{split} utterance `{}` has no {target} label", u.id))
        })?;
        x.push(table.rows[row].clone());
        y.push(label);
    }
    Ok((x, y))
}

#[derive(Debug, Clone)]
pub struct TargetTraining {
    pub target: Target,
    pub ranking: FeatureRanking,
    pub selection: svr::Selection,
}

fn selection_csv(sel: &svr::Selection) -> String {
    let mut s = String::from("k,kernel,c,epsilon,gamma,validation_ccc,kkt_violation,selected\n");
    for rec in &sel.log {
        let chosen = rec.k == sel.k && rec.hyper == sel.hyper;
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            rec.k,
            rec.hyper.kernel.name(),
            rec.hyper.c,
            rec.hyper.epsilon,
            rec.hyper.kernel.gamma().map_or(String::new(), |g| g.to_string()),
            rec.validation_ccc,
            rec.kkt_violation,
            u8::from(chosen)
        ));
    }
    s
}

/// `train`: fits the scaler on the training split, ranks features and runs
/// the SVR model selection for every requested target, writing all model
/// artifacts into `out_dir`.
pub fn train(
    features: &Path,
    manifest: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
    targets: &[Target],
) -> Result<Vec<TargetTraining>> {
    let table = FeatureTable::load(features)?;
    table.check_width(N_FEATURES)?;
    let utterances = dataset::load_manifest(manifest)?;

    let train_ids: Vec<usize> = {
        let by_id: HashMap<&str, usize> = table.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        utterances
            .iter()
            .filter(|u| u.split == Split::Train)
            .filter_map(|u| by_id.get(u.id.as_str()).copied())
            .collect()
    };
    if train_ids.is_empty() {
        return Err(Error::Contract("training split has no feature rows".into()));
    }
    let train_rows: Vec<Vec<f64>> = train_ids.iter().map(|&i| table.rows[i].clone()).collect();
    let scaler = preprocess::fit_scaler(&train_rows, cfg.percentile_low, cfg.percentile_high)?;
    let scaled = FeatureTable {
        ids: table.ids.clone(),
        rows: preprocess::transform(&table.rows, &scaler)?,
    };

    let mut results = Vec::new();
    for &target in targets {
        let (tx, ty) = labeled_rows(&scaled, &utterances, Split::Train, target)?;
        let (vx, vy) = labeled_rows(&scaled, &utterances, Split::Validation, target)?;
        if vx.is_empty() {
            return Err(Error::Contract("validation split has no feature rows".into()));
        }
        let ranking = relieff::rrelieff(&tx, &ty, &cfg.relieff)?;
        let selection = svr::model_select(
            LabeledSet { x: &tx, y: &ty },
            LabeledSet { x: &vx, y: &vy },
            &ranking,
            &cfg.grid,
        )?;
        log::info!(
            "{target}: k = {}, {} C = {} eps = {}, validation CCC {:.4}",
            selection.k,
            selection.hyper.kernel,
            selection.hyper.c,
            selection.hyper.epsilon,
            selection
                .log
                .iter()
                .map(|r| r.validation_ccc)
                .fold(f64::NEG_INFINITY, f64::max)
        );
        results.push(TargetTraining {
            target,
            ranking,
            selection,
        });
    }

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    scaler.save(out_dir.join("scaler.csv"))?;
    for r in &results {
        let t = r.target.as_str();
        r.ranking
            .save(out_dir.join(format!("ranking_{t}.csv")), feature_names())?;
        r.selection.model.save(out_dir.join(format!("svr_{t}.model")))?;
        write_file(&out_dir.join(format!("selection_{t}.csv")), &selection_csv(&r.selection))?;
    }
    Ok(results)
}

/// Writes `utterance_id,prediction` rows.
pub fn write_predictions(path: impl AsRef<Path>, rows: &[(String, f64)]) -> Result<()> {
    let mut s = String::from("utterance_id,prediction\n");
    for (id, v) in rows {
        s.push_str(&format!("{id},{v}\n"));
    }
    write_file(path.as_ref(), &s)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    if reader.headers()?.iter().ne(["utterance_id", "prediction"]) {
        return Err(Error::format(path, "expected header `utterance_id,prediction`"));
    }
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::format(path, "expected 2 columns"));
            }
            let v = rec[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("bad prediction for `{}`", &rec[0])))?;
            Ok((rec[0].to_string(), v))
        })
        .collect()
}

/// Ids of the manifest utterances in any of `splits`.
pub fn split_ids(manifest: &Path, splits: &[Split]) -> Result<HashSet<String>> {
    Ok(dataset::load_manifest(manifest)?
        .into_iter()
        .filter(|u| splits.contains(&u.split))
        .map(|u| u.id)
        .collect())
}

/// `predict`: applies the saved scaler and per-target SVR models to a
/// feature file, writing `<out_dir>/<target>/svr_audio.csv`. With `only`,
/// rows whose id is not in the set are skipped. Nothing is written unless
/// every target's model is compatible with the features.
pub fn predict(
    model_dir: &Path,
    features: &Path,
    out_dir: &Path,
    targets: &[Target],
    only: Option<&HashSet<String>>,
) -> Result<Vec<PathBuf>> {
    let mut table = FeatureTable::load(features)?;
    let scaler = ScalerParams::load(model_dir.join("scaler.csv"))?;
    table.check_width(scaler.columns.len())?;
    if let Some(keep) = only {
        let (ids, rows) = table
            .ids
            .into_iter()
            .zip(table.rows)
            .filter(|(id, _)| keep.contains(id))
            .unzip();
        table = FeatureTable { ids, rows };
    }
    let scaled = preprocess::transform(&table.rows, &scaler)?;

    let mut outputs = Vec::new();
    for &target in targets {
        let model = SvrModel::load(model_dir.join(format!("svr_{target}.model")))?;
        let selected = scaled
            .iter()
            .map(|r| model.select(r))
            .collect::<Result<Vec<_>>>()?;
        let preds = svr::predict(&model, &selected)?;
        let rows: Vec<(String, f64)> = table.ids.iter().cloned().zip(preds).collect();
        outputs.push((
            out_dir.join(target.as_str()).join(format!("{AUDIO_MODEL_NAME}.csv")),
            rows,
        ));
    }
    for (path, rows) in &outputs {
        write_predictions(path, rows)?;
    }
    Ok(outputs.into_iter().map(|o| o.0).collect())
}

fn prediction_files(dir: &Path, target: Target) -> Result<Vec<PathBuf>> {
    let tdir = dir.join(target.as_str());
    let mut files: Vec<PathBuf> = std::fs::read_dir(&tdir)
        .map_err(|e| Error::io(&tdir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Contract(format!("no prediction files in {}", tdir.display())));
    }
    Ok(files)
}

fn model_name(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

/// Loads every `<dir>/<target>/*.csv` into an id-aligned prediction set.
/// Utterances are ordered by id; every file must cover the same ids.
pub fn load_prediction_set(dir: &Path, target: Target) -> Result<PredictionSet> {
    let files = prediction_files(dir, target)?;
    let mut names = Vec::new();
    let mut maps: Vec<BTreeMap<String, f64>> = Vec::new();
    for f in &files {
        let rows = read_predictions(f)?;
        let n = rows.len();
        let map: BTreeMap<String, f64> = rows.into_iter().collect();
        if map.len() != n {
            return Err(Error::format(f, "duplicate utterance id"));
        }
        names.push(model_name(f));
        maps.push(map);
    }
    let ids: Vec<String> = maps[0].keys().cloned().collect();
    for (name, m) in names.iter().zip(&maps) {
        if m.len() != ids.len() || !ids.iter().all(|id| m.contains_key(id)) {
            return Err(Error::Contract(format!(
                "{target} predictions of `{name}` are not aligned with `{}`",
                names[0]
            )));
        }
    }
    let predictions = maps
        .iter()
        .map(|m| ids.iter().map(|id| m[id]).collect())
        .collect();
    PredictionSet::new(names, ids, predictions)
}

/// `fuse`: SMLR fusion of every base model per target after exclusions.
pub fn fuse(
    pred_dir: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
    targets: &[Target],
) -> Result<Vec<(Target, fusion::FusionResult)>> {
    let mut results = Vec::new();
    for &target in targets {
        let set = load_prediction_set(pred_dir, target)?;
        let result = fusion::smlr_fuse(&set, cfg.exclusions(target))?;
        results.push((target, set.utterance_ids, result));
    }
    let mut out = Vec::new();
    for (target, ids, result) in results {
        let rows: Vec<(String, f64)> = ids.into_iter().zip(result.fused.iter().copied()).collect();
        write_predictions(
            out_dir.join(target.as_str()).join(format!("{FUSED_MODEL_NAME}.csv")),
            &rows,
        )?;
        let mut report = String::from("model,weight,accuracy_estimate\n");
        for ((name, w), a) in result
            .model_names
            .iter()
            .zip(&result.weights)
            .zip(&result.accuracy_estimates)
        {
            report.push_str(&format!("{name},{w},{a}\n"));
        }
        write_file(
            &out_dir.join(format!("{FUSED_MODEL_NAME}_weights_{target}.csv")),
            &report,
        )?;
        out.push((target, result));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub target: Target,
    pub eval: metrics::Evaluation,
}

/// `eval`: CCC, MSE and Pearson per model and target for every prediction
/// file under the given directories, scored against manifest labels. With
/// `split`, only utterances of that split are scored.
pub fn evaluate(
    pred_dirs: &[PathBuf],
    manifest: &Path,
    out: &Path,
    targets: &[Target],
    split: Option<Split>,
) -> Result<Vec<ReportRow>> {
    let utterances = dataset::load_manifest(manifest)?;
    let by_id: HashMap<&str, &Utterance> = utterances.iter().map(|u| (u.id.as_str(), u)).collect();
    let mut rows = Vec::new();
    for &target in targets {
        for dir in pred_dirs {
            for file in prediction_files(dir, target)? {
                let mut truth = Vec::new();
                let mut pred = Vec::new();
                for (id, p) in read_predictions(&file)? {
                    let u = by_id.get(id.as_str()).ok_or_else(|| {
                        Error::Contract(format!("`{id}` in {} is not in the manifest", file.display()))
                    })?;
                    if split.is_some_and(|s| s != u.split) {
                        continue;
                    }
                    let y = u
                        .label(target)
                        .ok_or_else(|| Error::Contract(format!("no {target} label for `{id}`")))?;
                    truth.push(y);
                    pred.push(p);
                }
                rows.push(ReportRow {
                    model: model_name(&file),
                    target,
                    eval: metrics::evaluate(&truth, &pred)?,
                });
            }
        }
    }
    let mut s = String::from("model,target,ccc,mse,pearson,n\n");
    for r in &rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.model, r.target, r.eval.ccc, r.eval.mse, r.eval.pearson, r.eval.n
        ));
    }
    write_file(out, &s)?;
    Ok(rows)
}
