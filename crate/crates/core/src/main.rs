use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use orthopair::canonical::{
    classify, classify_as, default_tol, signature_distance, signature_sequence, to_hessenberg_observer, to_ots, Form,
};
use orthopair::fast_apply::{gradient_check, ImplicitStack, ParamIndex, StackParams};
use orthopair::grammians::grammian_report;
use orthopair::hoon::{hoon_domain_check, hoon_factor, hoon_reconstruct};
use orthopair::io::{self, ModelFile, ParamFile};
use orthopair::normal_form::to_output_normal;
use orthopair::otson::{family_for, otson_domain_check, otson_factor, otson_reconstruct, DomainStatus, BOUNDARY_TOL};
use orthopair::rotations::OrpKind;
use orthopair::schur::{schur_on, OrderConvention};
use orthopair::{Error, OutputPair, Result};

#[derive(Parser)]
#[command(name = "orthopair", version, about = "Output-normal canonical forms for state-space output pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Hoon,
    Ots,
    Schur,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Otson,
    Hoon,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Q1,
    Q2,
    Q3,
    Householder,
}

impl FamilyArg {
    fn kind(self) -> OrpKind {
        match self {
            FamilyArg::Q1 => OrpKind::Q1,
            FamilyArg::Q2 => OrpKind::Q2,
            FamilyArg::Q3 => OrpKind::Q3,
            FamilyArg::Householder => OrpKind::Householder,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Transform a model to output-normal coordinates.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reduce an output-normal model to a canonical form.
    Reduce {
        #[arg(long, value_enum)]
        form: FormArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Order Schur blocks by decreasing eigenvalue modulus.
        #[arg(long)]
        descending: bool,
    },
    /// Factor a canonical-form model into rotation parameters.
    Factor {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// q1 or q2 for otson (default q1); q3 for hoon (default). householder for either.
        #[arg(long, value_enum)]
        family: Option<FamilyArg>,
        /// Write parameters on the boundary of the domain instead of failing.
        #[arg(long)]
        allow_boundary: bool,
        #[arg(long, default_value_t = BOUNDARY_TOL)]
        tol_boundary: f64,
    },
    /// Build a model from rotation parameters.
    Reconstruct {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the invariant checks on a model.
    Check {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol_on: f64,
        #[arg(long, default_value_t = 1e-9)]
        tol_roundtrip: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol_signature: f64,
    },
    /// Grammian condition numbers and Hankel singular values.
    Cond {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Generate a random stable observable model.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 0.9)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare analytic parameter derivatives with central differences.
    Gradcheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Normalize { input, out } => normalize(&input, &out),
        Command::Reduce { form, input, out, descending } => reduce(form, &input, &out, descending),
        Command::Factor { kind, input, out, family, allow_boundary, tol_boundary } => {
            factor(kind, &input, &out, family, allow_boundary, tol_boundary)
        }
        Command::Reconstruct { input, out } => reconstruct(&input, &out),
        Command::Check { input, params, tol_on, tol_roundtrip, tol_signature } => {
            check(&input, params.as_deref(), tol_on, tol_roundtrip, tol_signature)
        }
        Command::Cond { input } => cond(&input),
        Command::Random { n, d, m, rho, seed, out } => {
            let model = io::random_system(n, d, m, rho, seed)?;
            io::write_model(&out, &model)?;
            println!("wrote random model n={n} d={d} m={m} rho={rho} seed={seed}");
            Ok(0)
        }
        Command::Gradcheck { input, tol, step, seed } => gradcheck(&input, tol, step, seed),
    }
}

fn normalize(input: &PathBuf, out: &PathBuf) -> Result<u8> {
    let model = io::read_model(input)?;
    let pair = model.pair()?;
    let (on, tr) = to_output_normal(&pair)?;
    let b = model.b_matrix()?.map(|b| &tr.t_inv * b);
    io::write_model(out, &model.with_pair(&on, b, "normalize"))?;
    println!("on_residual {:.3e}", on.on_residual());
    Ok(0)
}

fn require_on(pair: &OutputPair) -> Result<()> {
    let r = pair.on_residual();
    if r > orthopair::canonical::ON_GATE {
        return Err(Error::Form(format!("model is not output normal (residual {r:.3e}); run normalize first")));
    }
    Ok(())
}

fn reduce(form: FormArg, input: &PathBuf, out: &PathBuf, descending: bool) -> Result<u8> {
    let model = io::read_model(input)?;
    let pair = model.pair()?;
    require_on(&pair)?;
    let b = model.b_matrix()?;
    let (reduced, b, form) = match form {
        FormArg::Ots => {
            let (p, u) = to_ots(&pair)?;
            (p, b.map(|b| u.transpose() * b), Form::Ots)
        }
        FormArg::Hoon => {
            let (p, u) = to_hessenberg_observer(&pair)?;
            (p, b.map(|b| u.transpose() * b), Form::Ho)
        }
        FormArg::Schur => {
            let conv = if descending { OrderConvention::Descending } else { OrderConvention::Ascending };
            // schur_on renormalizes internally; repeat it to carry B along
            let (_, tr) = to_output_normal(&pair)?;
            let (p, sf) = schur_on(&pair, conv)?;
            (p, b.map(|b| sf.u.transpose() * (&tr.t_inv * b)), Form::Schur)
        }
    };
    let cls = classify_as(&reduced, form, default_tol(&reduced));
    io::write_model(out, &model.with_pair(&reduced, b, &format!("reduce {form}")))?;
    println!("form {form}");
    println!("structure_residual {:.3e}", cls.structure_residual);
    println!("on_residual {:.3e}", reduced.on_residual());
    println!("standard {} unreduced {} strict {}", cls.standard, cls.unreduced, cls.strict);
    if let Some(k) = cls.reducible_index {
        println!("reducible_index {k}");
    }
    Ok(0)
}

fn factor(
    kind: KindArg,
    input: &PathBuf,
    out: &PathBuf,
    family: Option<FamilyArg>,
    allow_boundary: bool,
    tol: f64,
) -> Result<u8> {
    let model = io::read_model(input)?;
    let pair = model.pair()?;
    let (params, status) = match kind {
        KindArg::Otson => {
            let fam = family_for(family.map_or(OrpKind::Q1, FamilyArg::kind), pair.d())?;
            let p = otson_factor(&pair, fam)?;
            let s = otson_domain_check(&p, tol);
            (StackParams::Otson(p), s)
        }
        KindArg::Hoon => {
            let p = hoon_factor(&pair, family.map_or(OrpKind::Q3, FamilyArg::kind))?;
            let s = hoon_domain_check(&p, tol);
            (StackParams::Hoon(p), s)
        }
    };
    println!("domain {status}");
    if status != DomainStatus::Strict && !allow_boundary {
        return Err(Error::NotStrict(format!(
            "parameters are {status}, so they are not unique; pass --allow-boundary to write them anyway"
        )));
    }
    let back = ImplicitStack::new(params.clone());
    let rebuilt = orthopair::fast_apply::materialize(&back)?;
    println!("roundtrip_residual {:.3e}", (rebuilt.stack() - pair.stack()).norm());
    io::write_params(out, &ParamFile::from_params(&params))?;
    Ok(0)
}

fn reconstruct(input: &PathBuf, out: &PathBuf) -> Result<u8> {
    let pf = io::read_params(input)?;
    let pair = match pf.to_params()? {
        StackParams::Otson(p) => otson_reconstruct(&p)?,
        StackParams::Hoon(p) => hoon_reconstruct(&p)?,
    };
    let meta = io::Metadata { seed: None, provenance: format!("reconstruct {}", input.display()) };
    io::write_model(out, &ModelFile::from_pair(&pair, None, None, meta))?;
    println!("on_residual {:.3e}", pair.on_residual());
    Ok(0)
}

struct Report {
    ok: bool,
}

impl Report {
    fn line(&mut self, name: &str, value: f64, limit: f64) {
        let pass = value <= limit;
        self.ok &= pass;
        println!("{:<20} {:>11.3e}  <= {:.1e}  {}", name, value, limit, if pass { "ok" } else { "FAIL" });
    }

    fn flag(&mut self, name: &str, pass: bool, detail: &str) {
        self.ok &= pass;
        println!("{:<20} {:>11}  {}", name, detail, if pass { "ok" } else { "FAIL" });
    }
}

fn check(input: &PathBuf, params: Option<&std::path::Path>, tol_on: f64, tol_rt: f64, tol_sig: f64) -> Result<u8> {
    let model = io::read_model(input)?;
    let pair = model.pair()?;
    let mut r = Report { ok: true };
    r.line("on_residual", pair.on_residual(), tol_on);
    let cls = classify(&pair, default_tol(&pair));
    r.flag("form", true, &cls.form.to_string());
    if cls.form != Form::None {
        r.line("structure_residual", cls.structure_residual, default_tol(&pair));
    }
    match cls.form {
        Form::Ots if cls.strict => {
            let fam = family_for(OrpKind::Q1, pair.d())?;
            let back = otson_reconstruct(&otson_factor(&pair, fam)?)?;
            r.line("roundtrip_residual", (back.stack() - pair.stack()).norm(), tol_rt);
        }
        Form::Ho if cls.strict && !cls.degenerate && pair.n() >= 2 => {
            let back = hoon_reconstruct(&hoon_factor(&pair, OrpKind::Q3)?)?;
            r.line("roundtrip_residual", (back.stack() - pair.stack()).norm(), tol_rt);
        }
        _ => {}
    }
    if let Some(path) = params {
        let pf = io::read_params(path)?;
        let expected = orthopair::fast_apply::materialize(&ImplicitStack::new(pf.to_params()?))?;
        if expected.n() != pair.n() || expected.d() != pair.d() {
            return Err(Error::Dimension("parameter file and model have different dimensions".into()));
        }
        r.line("params_residual", (expected.stack() - pair.stack()).norm(), tol_rt);
        let dist = signature_distance(&signature_sequence(&expected), &signature_sequence(&pair));
        r.line("signature_distance", dist, tol_sig);
    }
    println!("{}", if r.ok { "all checks passed" } else { "some checks failed" });
    Ok(if r.ok { 0 } else { 5 })
}

fn cond(input: &PathBuf) -> Result<u8> {
    let model = io::read_model(input)?;
    let b = model.b_matrix()?;
    let rep = grammian_report(&model.a_matrix()?, b.as_ref(), &model.c_matrix()?)?;
    println!("{:<12} {:>14}", "quantity", "value");
    println!("{:<12} {:>14.4}", "kappa_ctrl", rep.kappa_ctrl);
    println!("{:<12} {:>14.4}", "kappa_obs", rep.kappa_obs);
    println!("{:<12} {:>14.4}", "kappa_sigma", rep.kappa_sigma);
    println!("{:<12} {:>14.6}", "excess", rep.excess);
    for (i, h) in rep.hankel.iter().enumerate() {
        println!("{:<12} {:>14.6e}", format!("hankel[{}]", i + 1), h);
    }
    Ok(0)
}

fn gradcheck(input: &PathBuf, tol: f64, step: f64, seed: u64) -> Result<u8> {
    let pf = io::read_params(input)?;
    let s = ImplicitStack::new(pf.to_params()?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(s.n(), |_, _| StandardNormal.sample(&mut rng));
    let errs = gradient_check(&s, &v, step)?;
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let bad: Vec<_> = errs.iter().filter(|e| e.1 > tol).collect();
    for (which, e) in &bad {
        let name = match which {
            ParamIndex::Gamma => "gamma".to_string(),
            ParamIndex::Angle { stage, index } => format!("theta[{}][{}]", stage + 1, index + 1),
        };
        println!("{name:<16} {e:.3e}");
    }
    println!("parameters {} max_error {:.3e} tol {:.1e}", errs.len(), worst, tol);
    if bad.is_empty() {
        println!("gradient check passed");
        Ok(0)
    } else {
        println!("gradient check failed for {} parameters", bad.len());
        Ok(5)
    }
}
