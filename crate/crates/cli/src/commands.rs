use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lesionseg::io::{load_image, load_mask, load_roi, save_gray8, save_image, save_mask, BitDepth};
use lesionseg::metrics::{aggregate, dice, evaluate, CaseMetrics};
use lesionseg::phantom::{generate_phantom, PhantomSpec, NOISE_ALGORITHM};
use lesionseg::{
    par, segment, BinaryMask, GrayImage, Method, MethodKind, PipelineConfig, PixelSpacing,
    RegionOfInterest,
};

use crate::args::{BenchmarkArgs, EvaluateArgs, PhantomArgs, SegmentArgs};
use crate::manifest::{MarkerSweep, PhantomCase, PhantomRecord, RunManifest};
use crate::report::{self, CSV_HEADER};

/// Global settings resolved once per invocation.
#[derive(Debug, Clone)]
pub struct Globals {
    pub out_dir: Option<PathBuf>,
    pub spacing: Option<PixelSpacing>,
}

impl Globals {
    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).with_context(|| format!("{}", dir.display()))?;
        Ok(dir)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("{}", path.display()))
}

fn method_label(kind: MethodKind) -> &'static str {
    match kind {
        MethodKind::Kmeans => "KM",
        MethodKind::Gmm => "GMM",
        MethodKind::Mcwt => "MCWT",
    }
}

fn warn_undefined(case: &str, m: &CaseMetrics) {
    for name in report::undefined(m) {
        eprintln!("warning: {name} is undefined for case '{case}' (empty mask); cell left blank");
    }
}

pub fn segment_cmd(ctx: &Globals, args: &SegmentArgs) -> Result<()> {
    // settle every parameter before touching the inputs
    let (pipeline, image, roi, truth, spacing) = match &args.manifest {
        Some(path) => {
            let m = RunManifest::load(path, "segment")?;
            let Some(p) = m.pipelines.first().copied() else {
                bail!("{}: manifest has no pipeline", path.display());
            };
            let image = m
                .input("image")
                .with_context(|| format!("{}: manifest has no image input", path.display()))?
                .to_path_buf();
            let roi = m.input("roi").map(Path::to_path_buf);
            let truth = m.input("truth").map(Path::to_path_buf);
            (p, image, roi, truth, m.spacing)
        }
        None => (
            args.params.pipeline(args.method)?,
            args.image.clone().expect("clap enforces --image"),
            args.roi.clone(),
            args.truth.clone(),
            ctx.spacing.unwrap_or_default(),
        ),
    };

    let img = load_image(&image)?;
    let region = roi.as_deref().map(load_roi).transpose()?;
    let reference = truth.as_deref().map(load_mask).transpose()?;
    let mask = segment(&img, region, &pipeline)?;

    let out = ctx.out_dir()?;
    save_mask(&mask, out.join("mask.png"))?;
    save_gray8(
        img.width(),
        img.height(),
        report::overlay(&img, &mask, reference.as_ref()),
        out.join("overlay.png"),
    )?;
    let mut manifest = RunManifest::new("segment", spacing);
    manifest.inputs.insert("image".into(), image.clone());
    if let Some(r) = roi {
        manifest.inputs.insert("roi".into(), r);
    }
    manifest.outputs = vec!["mask.png".into(), "overlay.png".into()];
    if let (Some(t), Some(reference)) = (truth, reference) {
        let m = evaluate(&mask, &reference, &spacing)?;
        let case = image.file_stem().and_then(|s| s.to_str()).unwrap_or("case");
        warn_undefined(case, &m);
        let csv = format!(
            "{CSV_HEADER}\n{}\n",
            report::metrics_row(case, pipeline.method.kind().name(), &m)
        );
        print!("{csv}");
        write_text(&out.join("metrics.csv"), &csv)?;
        manifest.inputs.insert("truth".into(), t);
        manifest.outputs.push("metrics.csv".into());
    }
    manifest.pipelines.push(pipeline);
    manifest.save(&out.join("manifest.json"))
}

pub fn evaluate_cmd(ctx: &Globals, args: &EvaluateArgs) -> Result<()> {
    let pred = load_mask(&args.pred)?;
    let truth = load_mask(&args.truth)?;
    let spacing = ctx.spacing.unwrap_or_default();
    let m = evaluate(&pred, &truth, &spacing)
        .with_context(|| format!("{} vs {}", args.pred.display(), args.truth.display()))?;
    let case = args
        .case
        .clone()
        .or_else(|| {
            args.pred
                .file_stem()
                .and_then(|s| s.to_str())
                .map(str::to_owned)
        })
        .unwrap_or_else(|| "case".into());
    warn_undefined(&case, &m);
    let csv = format!(
        "{CSV_HEADER}\n{}\n",
        report::metrics_row(&case, &args.method, &m)
    );
    print!("{csv}");
    if ctx.out_dir.is_some() {
        write_text(&ctx.out_dir()?.join("metrics.csv"), &csv)?;
    }
    Ok(())
}

struct Case {
    name: String,
    dir: PathBuf,
}

fn find_case_file(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["png", "pgm"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

fn list_cases(corpus: &Path) -> Result<Vec<Case>> {
    let entries = fs::read_dir(corpus).with_context(|| format!("{}", corpus.display()))?;
    let mut cases = Vec::new();
    for e in entries {
        let e = e.with_context(|| format!("{}", corpus.display()))?;
        if e.path().is_dir() {
            cases.push(Case {
                name: e.file_name().to_string_lossy().into_owned(),
                dir: e.path(),
            });
        }
    }
    cases.sort_by(|a, b| a.name.cmp(&b.name));
    if cases.is_empty() {
        bail!("{}: no case directories found", corpus.display());
    }
    Ok(cases)
}

struct Loaded {
    image: GrayImage,
    truth: BinaryMask,
    roi: Option<RegionOfInterest>,
}

fn load_case(case: &Case) -> lesionseg::Result<Loaded> {
    let missing = |stem: &str| lesionseg::Error::Format {
        path: case.dir.join(format!("{stem}.png")),
        reason: "missing case file".into(),
    };
    let image = load_image(find_case_file(&case.dir, "image").ok_or_else(|| missing("image"))?)?;
    let truth = load_mask(find_case_file(&case.dir, "truth").ok_or_else(|| missing("truth"))?)?;
    let roi_path = case.dir.join("roi.json");
    let roi = if roi_path.is_file() {
        Some(load_roi(&roi_path)?)
    } else {
        None
    };
    Ok(Loaded { image, truth, roi })
}

struct Row {
    method: MethodKind,
    outcome: Result<CaseMetrics, String>,
}

struct CaseOutcome {
    rows: Vec<Row>,
    sweep: Vec<(usize, Option<f64>)>,
}

fn run_case(
    case: &Case,
    pipelines: &[PipelineConfig],
    sweep: Option<&MarkerSweep>,
    spacing: &PixelSpacing,
    out: &Path,
) -> CaseOutcome {
    let loaded = load_case(case);
    let rows = pipelines
        .iter()
        .map(|p| {
            let kind = p.method.kind();
            let outcome = (|| -> Result<CaseMetrics> {
                let c = loaded.as_ref().map_err(|e| anyhow::anyhow!("{e}"))?;
                let mask = segment(&c.image, c.roi, p)?;
                let stem = format!("{}_{}.png", case.name, kind.name());
                save_mask(&mask, out.join("masks").join(&stem))?;
                let px = report::overlay(&c.image, &mask, Some(&c.truth));
                save_gray8(
                    c.image.width(),
                    c.image.height(),
                    px,
                    out.join("overlays").join(&stem),
                )?;
                Ok(evaluate(&mask, &c.truth, spacing)?)
            })();
            Row {
                method: kind,
                outcome: outcome.map_err(|e| format!("{e:#}")),
            }
        })
        .collect();
    let sweep = match (sweep, &loaded) {
        (Some(s), Ok(c)) => (s.from..=s.to)
            .map(|n| {
                let mut p = s.pipeline;
                if let Method::Mcwt(ref mut m) = p.method {
                    m.markers = n;
                }
                let d = segment(&c.image, c.roi, &p)
                    .and_then(|mask| dice(&mask, &c.truth))
                    .ok();
                (n, d)
            })
            .collect(),
        (Some(s), Err(_)) => (s.from..=s.to).map(|n| (n, None)).collect(),
        (None, _) => Vec::new(),
    };
    CaseOutcome { rows, sweep }
}

pub fn benchmark_cmd(ctx: &Globals, args: &BenchmarkArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(path) => RunManifest::load(path, "benchmark")?,
        None => {
            let mut m = RunManifest::new("benchmark", ctx.spacing.unwrap_or_default());
            for (i, &kind) in args.methods.iter().enumerate() {
                if !args.methods[..i].contains(&kind) {
                    m.pipelines.push(args.params.pipeline(kind)?);
                }
            }
            if let Some((from, to)) = args.marker_sweep {
                m.marker_sweep = Some(MarkerSweep {
                    from,
                    to,
                    pipeline: args.params.pipeline(MethodKind::Mcwt)?,
                });
            }
            m.inputs.insert(
                "corpus".into(),
                args.corpus.clone().expect("clap enforces --corpus"),
            );
            m
        }
    };
    if manifest.pipelines.is_empty() {
        bail!("benchmark needs at least one method");
    }
    let corpus = manifest
        .input("corpus")
        .context("manifest has no corpus input")?;
    let cases = list_cases(corpus)?;
    let out = ctx.out_dir()?;
    for sub in ["masks", "overlays"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).with_context(|| format!("{}", d.display()))?;
    }

    let results = par::map_slice(&cases, |c| {
        run_case(
            c,
            &manifest.pipelines,
            manifest.marker_sweep.as_ref(),
            &manifest.spacing,
            &out,
        )
    });

    let mut csv = format!("{CSV_HEADER},error\n");
    for (case, res) in cases.iter().zip(&results) {
        for row in &res.rows {
            match &row.outcome {
                Ok(m) => csv.push_str(&format!(
                    "{},\n",
                    report::metrics_row(&case.name, row.method.name(), m)
                )),
                Err(e) => {
                    eprintln!(
                        "warning: case '{}' with {} failed: {e}",
                        case.name, row.method
                    );
                    csv.push_str(&format!(
                        "{},{},,,,,,{}\n",
                        report::sanitize(&case.name),
                        row.method,
                        report::sanitize(e)
                    ));
                }
            }
        }
    }
    let mut table = Vec::new();
    for p in &manifest.pipelines {
        let kind = p.method.kind();
        let ok: Vec<(String, CaseMetrics)> = cases
            .iter()
            .zip(&results)
            .flat_map(|(c, r)| {
                r.rows
                    .iter()
                    .filter(|row| row.method == kind)
                    .filter_map(|row| row.outcome.as_ref().ok().map(|m| (c.name.clone(), *m)))
            })
            .collect();
        let summary = aggregate(ok).ok();
        csv.push_str(&format!(
            "SUMMARY,{kind},{},\n",
            report::summary_cells(summary.as_ref()).join(",")
        ));
        let label = match p.method {
            Method::Mcwt(m) => format!("MCWT(n={})", m.markers),
            _ => method_label(kind).to_string(),
        };
        table.push((label, summary));
    }
    write_text(&out.join("results.csv"), &csv)?;
    let rendered = report::summary_table(&table);
    print!("{rendered}");
    write_text(&out.join("summary.txt"), &rendered)?;

    let mut outputs = vec!["results.csv".to_string(), "summary.txt".into()];
    if manifest.marker_sweep.is_some() {
        let mut sweep = String::from("case,n_markers,dsc\n");
        for (case, res) in cases.iter().zip(&results) {
            for (n, d) in &res.sweep {
                sweep.push_str(&format!(
                    "{},{n},{}\n",
                    report::sanitize(&case.name),
                    report::cell(*d)
                ));
            }
        }
        write_text(&out.join("sweep.csv"), &sweep)?;
        outputs.push("sweep.csv".into());
    }
    let mut record = manifest;
    record.outputs = outputs;
    record.save(&out.join("manifest.json"))
}

fn write_phantom(spec: &PhantomSpec, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    let (img, truth) = generate_phantom(spec)?;
    save_image(&img, dir.join("image.png"), BitDepth::Sixteen)?;
    save_mask(&truth, dir.join("truth.png"))?;
    let roi = serde_json::to_string(&spec.lesion_roi())? + "\n";
    write_text(&dir.join("roi.json"), &roi)
}

pub fn phantom_cmd(ctx: &Globals, args: &PhantomArgs) -> Result<()> {
    let record = if let Some(path) = &args.manifest {
        let m = RunManifest::load(path, "phantom")?;
        m.phantoms
            .with_context(|| format!("{}: manifest has no phantom list", path.display()))?
    } else {
        let cases = match (&args.spec, args.count) {
            (Some(path), _) => {
                let text =
                    fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
                let spec: PhantomSpec =
                    serde_json::from_str(&text).with_context(|| format!("{}", path.display()))?;
                vec![PhantomCase {
                    dir: String::new(),
                    spec,
                }]
            }
            (None, Some(n)) => {
                let (w, h) = args.size;
                (0..n)
                    .map(|i| PhantomCase {
                        dir: format!("case_{i:03}"),
                        spec: PhantomSpec::random_lesion(
                            args.seed + i as u64,
                            w,
                            h,
                            args.noise_sigma,
                            args.softness,
                        ),
                    })
                    .collect()
            }
            (None, None) => bail!("phantom needs --spec, --count or --manifest"),
        };
        PhantomRecord {
            noise_algorithm: NOISE_ALGORITHM.into(),
            cases,
        }
    };
    // reject the whole batch up front rather than leaving a partial corpus
    for c in &record.cases {
        c.spec
            .validate()
            .with_context(|| format!("phantom '{}'", c.dir))?;
    }
    let out = ctx.out_dir()?;
    let written = par::map_slice(&record.cases, |c| write_phantom(&c.spec, &out.join(&c.dir)));
    written.into_iter().collect::<Result<Vec<()>>>()?;
    let mut manifest = RunManifest::new("phantom", ctx.spacing.unwrap_or_default());
    manifest.outputs = record
        .cases
        .iter()
        .flat_map(|c| {
            ["image.png", "truth.png", "roi.json"]
                .map(|f| Path::new(&c.dir).join(f).to_string_lossy().into_owned())
        })
        .collect();
    manifest.phantoms = Some(record);
    manifest.save(&out.join("manifest.json"))
}
