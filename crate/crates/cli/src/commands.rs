use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use runaudit::aggregation::{accuracy_curve, aggregation_curve_categorical, aggregation_curve_continuous, TruthLabels};
use runaudit::categorical::{document_metrics, run_pair_metrics, summarize_categorical};
use runaudit::continuous::{doc_metrics, pair_metrics, summarize_continuous};
use runaudit::human::{compare_consistency, load_human_records};
use runaudit::run_matrix::{enumerate_run_pairs, read_long_records};
use runaudit::simulation::{bloat_scale, run_simulation, SimulationConfig};
use runaudit::text::{document_level_similarity, run_pair_similarity, summarize_similarity, tone_matrix, ToneLexicon};
use runaudit::{CategoricalRunMatrix, ContinuousMatrix, EmbeddingSet, LabelScheme};

use crate::args::*;
use crate::error::{as_config, CliError, CliResult};
use crate::report::{fixed, num, MetricTable, OutDir, ReportEnvelope};

const DEFAULT_MAX_K: usize = 20;
const DEFAULT_N_SYNTHETIC: usize = 50;

fn require_file(flag: &str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::missing_path(flag, path))
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    require_file("--config", path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn non_empty(n_docs: usize, input: &Path) -> CliResult<()> {
    if n_docs == 0 {
        return Err(CliError::Data(format!("{}: no records", input.display())));
    }
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PlainSettings {
    unit: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CurveSettings {
    k_values: Option<Vec<usize>>,
    n_synthetic: Option<usize>,
    seed: Option<u64>,
    restrict_disagreement: Option<bool>,
    unit: Option<String>,
}

impl CurveSettings {
    fn seed(&self, flag: Option<u64>, command: &str) -> CliResult<u64> {
        flag.or(self.seed).ok_or_else(|| {
            CliError::Config(format!("{command} is stochastic: pass --seed or set \"seed\" in the config file"))
        })
    }

    fn k_values(&self, n_runs: usize) -> Vec<usize> {
        self.k_values.clone().unwrap_or_else(|| (1..=n_runs.min(DEFAULT_MAX_K)).collect())
    }
}

fn complete_values(m: &ContinuousMatrix) -> (ContinuousMatrix, Vec<String>) {
    let (keep, drop): (Vec<usize>, Vec<usize>) = (0..m.n_docs()).partition(|&d| m.row_is_complete(d));
    (m.select_docs(&keep), drop.iter().map(|&d| m.doc_ids()[d].clone()).collect())
}

pub fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    match cli.command {
        Command::Categorical(a) => categorical(a),
        Command::Continuous(a) => continuous(a),
        Command::Textsim(a) => textsim(a),
        Command::Aggregate(a) => aggregate(a),
        Command::Accuracy(a) => accuracy(a),
        Command::Human(a) => human(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn categorical(a: CategoricalArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    require_file("--schema", &a.schema)?;
    let _: PlainSettings = read_config(a.common.config.as_ref())?;
    let scheme = LabelScheme::load(&a.schema).map_err(as_config)?;
    let m = CategoricalRunMatrix::load(&a.common.input, scheme)?;
    non_empty(m.n_docs(), &a.common.input)?;
    let echo = json!({ "input": path_str(&a.common.input), "schema": path_str(&a.schema) });
    let mut out = OutDir::create(&a.common.out)?;
    write_categorical(&mut out, "categorical", "Inter-run agreement", echo, &m)?;
    Ok(out.written)
}

fn write_categorical(out: &mut OutDir, command: &str, title: &str, echo: Value, m: &CategoricalRunMatrix) -> CliResult<()> {
    let summary = summarize_categorical(m)?;
    let (complete, _) = m.drop_incomplete();
    let docs = document_metrics(&complete)?;
    let pairs = run_pair_metrics(&complete)?;
    let v = out.json("summary.json", &ReportEnvelope::new(command, echo, summary.dropped_doc_ids.clone(), &summary))?;
    out.text("summary.md", &categorical_md(title, &v))?;
    out.csv("document_metrics.csv", docs)?;
    out.csv("run_pair_metrics.csv", pairs)
}

fn categorical_md(title: &str, v: &Value) -> String {
    let p = |ptr: &str| num(v, &format!("/payload{ptr}"));
    let mut t = MetricTable::new(title, "Metric");
    t.section("Overall inter-rater agreements")
        .row("Fleiss' kappa", fixed(p("/fleiss_kappa"), 2))
        .row("Krippendorff's alpha", fixed(p("/krippendorff_alpha"), 2))
        .section("Run-level agreements")
        .row("Mean run-pair Cohen's kappa", fixed(p("/run_pair_kappa/mean"), 2))
        .row("Mean run-pair agreement (%)", fixed(p("/run_pair_agreement_pct/mean"), 2))
        .section("Document-level agreements")
        .row("Percentage of perfect agreement (%)", fixed(p("/perfect_agreement_pct"), 2))
        .row("Mean document-wise agreement (%)", fixed(p("/document_wise_agreement_pct/mean"), 2))
        .row("Mean majority class strength (%)", fixed(p("/majority_class_strength_pct/mean"), 2))
        .row("Mean classification uncertainty", fixed(p("/classification_uncertainty/mean"), 2))
        .note(&format!(
            "{} documents x {} runs ({} run pairs); {} documents dropped for missing runs.",
            p("/n_docs").unwrap_or(0.0),
            p("/n_runs").unwrap_or(0.0),
            p("/n_run_pairs").unwrap_or(0.0),
            v.pointer("/dropped_doc_ids").and_then(Value::as_array).map_or(0, Vec::len)
        ));
    t.render()
}

fn continuous(a: ContinuousArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    let settings: PlainSettings = read_config(a.common.config.as_ref())?;
    let unit = settings.unit.unwrap_or(a.unit);
    let m = ContinuousMatrix::load(&a.common.input, unit.clone())?;
    non_empty(m.n_docs(), &a.common.input)?;
    let (c, dropped) = complete_values(&m);
    non_empty(c.n_docs(), &a.common.input)?;
    let summary = summarize_continuous(&c)?;
    let echo = json!({ "input": path_str(&a.common.input), "unit": unit });
    let mut out = OutDir::create(&a.common.out)?;
    let v = out.json("summary.json", &ReportEnvelope::new("continuous", echo, dropped, &summary))?;
    let p = |ptr: &str| num(&v, &format!("/payload{ptr}"));
    let mut t = MetricTable::new("Inter-run consistency", "Metric");
    t.section("Overall inter-run reliability")
        .row("ICC2", fixed(p("/icc2"), 2))
        .section("Correlation")
        .row("Mean concordance correlation", fixed(p("/concordance/mean"), 2))
        .row("Mean Pearson correlation", fixed(p("/pearson/mean"), 2))
        .row("Mean Spearman correlation", fixed(p("/spearman/mean"), 2))
        .section("Run-level variation")
        .row("Mean run-pair MARD (%)", fixed(p("/run_pair_mard_pct/mean"), 2))
        .section("Document-level variation")
        .row("Documents with identical outputs (%)", fixed(p("/documents_identical_pct"), 2))
        .row("Mean document-wise MARD (%)", fixed(p("/document_wise_mard_pct/mean"), 2));
    out.text("summary.md", &t.render())?;
    out.csv("document_metrics.csv", doc_metrics(&c)?)?;
    out.csv("run_pair_metrics.csv", pair_metrics(&c)?)?;
    Ok(out.written)
}

#[derive(Serialize)]
struct PairSimilarity<'a> {
    run_a: &'a str,
    run_b: &'a str,
    similarity: f64,
}

#[derive(Serialize)]
struct DocSimilarity<'a> {
    doc_id: &'a str,
    similarity: f64,
}

fn textsim(a: TextsimArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    let _: PlainSettings = read_config(a.common.config.as_ref())?;
    let mut out;
    if let (Some(pos), Some(neg)) = (&a.lexicon_pos, &a.lexicon_neg) {
        require_file("--lexicon-pos", pos)?;
        require_file("--lexicon-neg", neg)?;
        let lex = ToneLexicon::load(pos, neg).map_err(as_config)?;
        let m = tone_matrix(read_long_records(&a.common.input, "text")?, &lex)?;
        non_empty(m.n_docs(), &a.common.input)?;
        let echo = json!({
            "input": path_str(&a.common.input),
            "lexicon_pos": path_str(pos),
            "lexicon_neg": path_str(neg),
            "mode": "tone",
        });
        out = OutDir::create(&a.common.out)?;
        write_categorical(&mut out, "textsim", "Tone agreement", echo, &m)?;
    } else {
        let e = EmbeddingSet::load(&a.common.input)?;
        non_empty(e.n_docs(), &a.common.input)?;
        let summary = summarize_similarity(&e)?;
        let pairs = enumerate_run_pairs(e.n_runs())?
            .into_iter()
            .map(|p| Ok((p, run_pair_similarity(&e, p)?)))
            .collect::<runaudit::Result<Vec<_>>>()?;
        let docs = (0..e.n_docs()).map(|d| document_level_similarity(&e, d)).collect::<runaudit::Result<Vec<_>>>()?;
        let echo = json!({ "input": path_str(&a.common.input), "mode": "embedding" });
        out = OutDir::create(&a.common.out)?;
        let v = out.json("summary.json", &ReportEnvelope::new("textsim", echo, Vec::new(), &summary))?;
        let mut t = MetricTable::new("Semantic similarity", "Metric");
        t.row("Mean run-pair cosine similarity", fixed(num(&v, "/payload/run_pair_similarity/mean"), 2))
            .row("Mean document-level cosine similarity", fixed(num(&v, "/payload/document_level_similarity/mean"), 2));
        out.text("summary.md", &t.render())?;
        out.csv(
            "run_pair_metrics.csv",
            pairs.iter().map(|(p, s)| PairSimilarity {
                run_a: &e.run_ids()[p.run_a],
                run_b: &e.run_ids()[p.run_b],
                similarity: *s,
            }),
        )?;
        out.csv(
            "document_metrics.csv",
            docs.iter().enumerate().map(|(d, s)| DocSimilarity { doc_id: &e.doc_ids()[d], similarity: *s }),
        )?;
    }
    Ok(out.written)
}

fn aggregate(a: AggregateArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    if let Some(s) = &a.schema {
        require_file("--schema", s)?;
    }
    let settings: CurveSettings = read_config(a.common.config.as_ref())?;
    let seed = settings.seed(a.seed, "aggregate")?;
    let n_synthetic = settings.n_synthetic.unwrap_or(DEFAULT_N_SYNTHETIC);
    let restrict = a.restrict_disagreement || settings.restrict_disagreement.unwrap_or(false);
    let mut out;
    if let Some(schema) = &a.schema {
        let scheme = LabelScheme::load(schema).map_err(as_config)?;
        let m = CategoricalRunMatrix::load(&a.common.input, scheme)?;
        non_empty(m.n_docs(), &a.common.input)?;
        let (complete, dropped) = m.drop_incomplete();
        let ks = settings.k_values(complete.n_runs());
        let curve = aggregation_curve_categorical(&complete, &ks, n_synthetic, seed, restrict)?;
        let echo = json!({
            "input": path_str(&a.common.input),
            "schema": path_str(schema),
            "mode": "majority_vote",
            "seed": seed,
            "k_values": ks,
            "n_synthetic": n_synthetic,
            "restrict_disagreement": restrict,
        });
        out = OutDir::create(&a.common.out)?;
        out.json("curve.json", &ReportEnvelope::new("aggregate", echo, dropped, &curve))?;
        out.csv("curve.csv", &curve)?;
    } else {
        if restrict {
            return Err(CliError::Config("--restrict-disagreement applies to label inputs (pass --schema)".into()));
        }
        let unit = settings.unit.clone().unwrap_or_else(|| "value".into());
        let m = ContinuousMatrix::load(&a.common.input, unit.clone())?;
        non_empty(m.n_docs(), &a.common.input)?;
        let (c, dropped) = complete_values(&m);
        let ks = settings.k_values(c.n_runs());
        let curve = aggregation_curve_continuous(&c, &ks, n_synthetic, seed)?;
        let echo = json!({
            "input": path_str(&a.common.input),
            "unit": unit,
            "mode": "mean",
            "seed": seed,
            "k_values": ks,
            "n_synthetic": n_synthetic,
        });
        out = OutDir::create(&a.common.out)?;
        out.json("curve.json", &ReportEnvelope::new("aggregate", echo, dropped, &curve))?;
        out.csv("curve.csv", &curve)?;
    }
    Ok(out.written)
}

#[derive(Serialize)]
struct AccuracyRow {
    k: usize,
    n_docs: usize,
    n_balanced: usize,
    f1_mean: f64,
    f1_std: f64,
    f1_min: f64,
    f1_max: f64,
}

fn accuracy(a: AccuracyArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    require_file("--schema", &a.schema)?;
    require_file("--truth", &a.truth)?;
    let settings: CurveSettings = read_config(a.common.config.as_ref())?;
    let seed = settings.seed(a.seed, "accuracy")?;
    let n_synthetic = settings.n_synthetic.unwrap_or(DEFAULT_N_SYNTHETIC);
    let restrict = a.restrict_disagreement || settings.restrict_disagreement.unwrap_or(false);
    let scheme = LabelScheme::load(&a.schema).map_err(as_config)?;
    let m = CategoricalRunMatrix::load(&a.common.input, scheme)?;
    non_empty(m.n_docs(), &a.common.input)?;
    let (complete, dropped) = m.drop_incomplete();
    let mut truth = TruthLabels::load(&a.truth, complete.scheme())?;
    truth.0.retain(|d, _| !dropped.contains(d));
    let ks = settings.k_values(complete.n_runs());
    let curve = accuracy_curve(&complete, &truth, &ks, n_synthetic, seed, restrict)?;
    let echo = json!({
        "input": path_str(&a.common.input),
        "schema": path_str(&a.schema),
        "truth": path_str(&a.truth),
        "seed": seed,
        "k_values": ks,
        "n_synthetic": n_synthetic,
        "restrict_disagreement": restrict,
        "oversampling": "random_duplication",
    });
    let mut out = OutDir::create(&a.common.out)?;
    out.json("accuracy.json", &ReportEnvelope::new("accuracy", echo, dropped, &curve))?;
    out.csv(
        "accuracy_curve.csv",
        curve.iter().map(|p| AccuracyRow {
            k: p.k,
            n_docs: p.n_docs,
            n_balanced: p.n_balanced,
            f1_mean: p.f1.mean,
            f1_std: p.f1.std,
            f1_min: p.f1.min,
            f1_max: p.f1.max,
        }),
    )?;
    Ok(out.written)
}

fn human(a: HumanArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    require_file("--schema", &a.schema)?;
    require_file("--human", &a.human)?;
    let _: PlainSettings = read_config(a.common.config.as_ref())?;
    let scheme = LabelScheme::load(&a.schema).map_err(as_config)?;
    let m = CategoricalRunMatrix::load(&a.common.input, scheme)?;
    non_empty(m.n_docs(), &a.common.input)?;
    let (complete, dropped) = m.drop_incomplete();
    let records: Vec<_> = load_human_records(&a.human, complete.scheme())?
        .into_iter()
        .filter(|h| !dropped.contains(&h.doc_id))
        .collect();
    let report = compare_consistency(&complete, &records)?;
    let echo = json!({
        "input": path_str(&a.common.input),
        "schema": path_str(&a.schema),
        "human": path_str(&a.human),
    });
    let mut out = OutDir::create(&a.common.out)?;
    let v = out.json("human_report.json", &ReportEnvelope::new("human", echo, dropped, &report))?;
    let p = |ptr: &str| num(&v, &format!("/payload{ptr}"));
    let mut t = MetricTable::new("Model versus human consistency", "Outcome");
    t.row("Model more consistent (%)", fixed(p("/model_wins_pct"), 2))
        .row("Humans more consistent (%)", fixed(p("/human_wins_pct"), 2))
        .row("Tie (%)", fixed(p("/ties_pct"), 2));
    for (i, level) in runaudit::human::HUMAN_LEVELS.iter().enumerate() {
        t.row(
            &format!("Mean model strength at {level}% human agreement (%)"),
            fixed(p(&format!("/per_level_model_agreement/{i}/mean_model_strength_pct")), 2),
        );
    }
    out.text("summary.md", &t.render())?;
    out.csv("human_documents.csv", &report.documents)?;
    #[derive(Serialize)]
    struct LevelRow {
        level: u8,
        n_docs: usize,
        pct: f64,
        mean_model_strength_pct: Option<f64>,
    }
    out.csv(
        "human_levels.csv",
        report.human_level_distribution.iter().zip(&report.per_level_model_agreement).map(|(s, g)| LevelRow {
            level: s.level,
            n_docs: s.n_docs,
            pct: s.pct,
            mean_model_strength_pct: g.mean_model_strength_pct,
        }),
    )?;
    Ok(out.written)
}

#[derive(Deserialize)]
struct SourceLength {
    doc_id: String,
    source_length: f64,
}

fn scale_by_source(m: &ContinuousMatrix, path: &Path) -> CliResult<ContinuousMatrix> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lengths = HashMap::new();
    for row in rdr.deserialize::<SourceLength>() {
        let row = row.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        lengths.insert(row.doc_id, row.source_length);
    }
    let missing: Vec<String> = m.doc_ids().iter().filter(|d| !lengths.contains_key(*d)).cloned().collect();
    if !missing.is_empty() {
        return Err(runaudit::AuditError::Join(missing).into());
    }
    let mut cells = Vec::with_capacity(m.n_cells());
    for (d, doc) in m.doc_ids().iter().enumerate() {
        for v in m.row(d) {
            cells.push(v.map(|v| bloat_scale(v, lengths[doc])).transpose()?);
        }
    }
    Ok(ContinuousMatrix::new(m.doc_ids().to_vec(), m.run_ids().to_vec(), cells, "ratio")?)
}

#[derive(Serialize)]
struct PieRow {
    outcome: &'static str,
    pct: f64,
}

#[derive(Serialize)]
struct HeatmapRow {
    significance: &'static str,
    sign: &'static str,
    pct: f64,
}

fn simulate(a: SimulateArgs) -> CliResult<Vec<PathBuf>> {
    require_file("--input", &a.common.input)?;
    if let Some(s) = &a.source_lengths {
        require_file("--source-lengths", s)?;
    }
    let mut raw: Value = read_config::<Option<Value>>(a.common.config.as_ref())?.unwrap_or_else(|| json!({}));
    let obj = raw.as_object_mut().ok_or_else(|| CliError::Config("simulation config must be a JSON object".into()))?;
    if let Some(seed) = a.seed {
        obj.insert("seed".into(), json!(seed));
    }
    if !obj.contains_key("seed") {
        return Err(CliError::Config("simulate is stochastic: pass --seed or set \"seed\" in the config file".into()));
    }
    let cfg: SimulationConfig = serde_json::from_value(raw).map_err(|e| CliError::Config(format!("simulation config: {e}")))?;
    cfg.validate().map_err(as_config)?;

    let m = ContinuousMatrix::load(&a.common.input, "words")?;
    non_empty(m.n_docs(), &a.common.input)?;
    let (m, dropped) = complete_values(&m);
    let observed = match &a.source_lengths {
        Some(p) => scale_by_source(&m, p)?,
        None => m,
    };
    let report = run_simulation(&observed, &cfg)?;
    let r = report.inference_rates;
    let s = report.sign_table;
    let pie_total = r.correct_pct + r.type1_pct + r.type2_pct;
    let sign_total = s.significant_correct_sign_pct
        + s.significant_incorrect_sign_pct
        + s.nonsignificant_correct_sign_pct
        + s.nonsignificant_incorrect_sign_pct;
    if (pie_total - 100.0).abs() > 1e-9 || (sign_total - 100.0).abs() > 1e-9 {
        return Err(CliError::Internal(format!("outcome shares sum to {pie_total} and {sign_total}")));
    }

    let echo = json!({
        "input": path_str(&a.common.input),
        "source_lengths": a.source_lengths.as_deref().map(path_str),
        "simulation": cfg,
    });
    let mut out = OutDir::create(&a.common.out)?;
    let v = out.json("sim_report.json", &ReportEnvelope::new("simulate", echo, dropped, &report))?;
    let p = |ptr: &str| num(&v, &format!("/payload{ptr}"));
    let mut t = MetricTable::new("Downstream inference simulation", "Statistic");
    t.section("Inference outcomes")
        .row("Correct inference (%)", fixed(p("/inference_rates/correct_pct"), 2))
        .row("Type I error (%)", fixed(p("/inference_rates/type1_pct"), 2))
        .row("Type II error (%)", fixed(p("/inference_rates/type2_pct"), 2))
        .row("Correct sign (%)", fixed(p("/correct_sign_overall_pct"), 2))
        .section("Length coefficient")
        .row("Mean truth coefficient", fixed(p("/coefficient_distribution/truth/mean"), 3))
        .row("Mean estimated coefficient", fixed(p("/coefficient_distribution/estimated/mean"), 3))
        .row("Mean truth t-statistic", fixed(p("/t_distribution/truth/mean"), 3))
        .row("Mean estimated t-statistic", fixed(p("/t_distribution/estimated/mean"), 3))
        .row("Mean truth R-squared", fixed(p("/r_squared/truth/mean"), 3))
        .note(&format!(
            "{} iterations x {} synthetic runs, aggregation level {}, seed {}.",
            cfg.n_iterations, cfg.n_synthetic_runs, cfg.aggregation_level, cfg.seed
        ));
    out.text("summary.md", &t.render())?;
    out.csv(
        "inference_pie.csv",
        [
            PieRow { outcome: "correct", pct: r.correct_pct },
            PieRow { outcome: "type1", pct: r.type1_pct },
            PieRow { outcome: "type2", pct: r.type2_pct },
        ],
    )?;
    out.csv(
        "sign_heatmap.csv",
        [
            HeatmapRow { significance: "significant", sign: "correct", pct: s.significant_correct_sign_pct },
            HeatmapRow { significance: "significant", sign: "incorrect", pct: s.significant_incorrect_sign_pct },
            HeatmapRow { significance: "non_significant", sign: "correct", pct: s.nonsignificant_correct_sign_pct },
            HeatmapRow { significance: "non_significant", sign: "incorrect", pct: s.nonsignificant_incorrect_sign_pct },
        ],
    )?;
    out.csv("coef_pairs.csv", &report.pairs)?;
    Ok(out.written)
}
