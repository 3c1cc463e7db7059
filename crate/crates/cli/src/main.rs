use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use trainpoly::cones::{cones_equal, fried_cone, mcmullen_cone, OpenCone};
use trainpoly::graphcore::PeriodicPointSpec;
use trainpoly::io::{self, ConeJson, EndoJson, GraphMapJson, PolynomialJson, SCHEMA};
use trainpoly::mcpoly::{check_subdivision, cycle_polynomial, det_polynomial};
use trainpoly::report::{self, Options, StageError};
use trainpoly::spectral::{entropy, specialize, stretch};
use trainpoly::{
    fixtures, CohomologyClass, CoordinateSystem, Error, GraphMap, LabeledTransitionGraph, LaurentPoly,
    MarkedAbelianization,
};

#[derive(Parser)]
#[command(name = "trainpoly", version, about = "McMullen polynomials, cones and stretch factors from train track maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Args, Clone)]
struct MapArgs {
    /// Graph map JSON file.
    #[arg(required_unless_present = "seed")]
    file: Option<PathBuf>,
    /// Use a seeded random train track map instead of a file.
    #[arg(long, conflicts_with = "file")]
    seed: Option<u64>,
    /// Root vertex name.
    #[arg(long)]
    root: Option<String>,
    /// Spanning tree as comma separated edge ids.
    #[arg(long, value_delimiter = ',')]
    tree: Option<Vec<String>>,
    /// Cohomology classes JSON file.
    #[arg(long)]
    classes: Option<PathBuf>,
    /// Coordinates JSON file naming characters from --classes.
    #[arg(long, requires = "classes")]
    coords: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Det,
    Cycle,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check the graph map and the train track conditions.
    Validate(MapArgs),
    /// The McMullen polynomial.
    Polynomial {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value = "det")]
        route: RouteArg,
    },
    /// Circuits of the transition graph and their orbit classes.
    Orbits(MapArgs),
    /// McMullen and Fried cones.
    Cones {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        check_equal: bool,
    },
    /// Specialization of the polynomial at a class.
    Specialize(ClassArgs),
    /// Stretch factor of a class.
    Stretch(ClassArgs),
    /// Entropy of a class.
    Entropy {
        #[command(flatten)]
        class: ClassArgs,
        /// Also sample the segment from the fibration class to this class.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Subdivide at a periodic orbit and check the subdivision identity.
    Subdivide {
        #[command(flatten)]
        map: MapArgs,
        /// Host edge and 1-based positions along the image chain, e.g. `d:3`.
        #[arg(long, required = true)]
        point: Vec<String>,
    },
    /// Free group endomorphisms.
    Endo {
        #[command(subcommand)]
        command: EndoCommand,
    },
    /// Everything at once.
    Analyze {
        #[command(flatten)]
        map: MapArgs,
        /// Also compare the determinant and cycle routes.
        #[arg(long)]
        check: bool,
        #[arg(long, hide = true)]
        perturb_arc: Option<usize>,
    },
}

#[derive(Args)]
struct ClassArgs {
    #[command(flatten)]
    map: MapArgs,
    /// A class name from --classes, or integer coordinates such as `-1,2`.
    #[arg(long, allow_hyphen_values = true)]
    class: String,
}

#[derive(Subcommand)]
enum EndoCommand {
    Analyze {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        cap: usize,
    },
}

/// Raised when a computed identity does not hold.
#[derive(Debug)]
struct Mismatch(String);

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "identity check failed: {}", self.0)
    }
}

impl std::error::Error for Mismatch {}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

struct Setup {
    map: GraphMap,
    marked: MarkedAbelianization,
    labeled: LabeledTransitionGraph,
    coords: CoordinateSystem,
    classes: Vec<CohomologyClass>,
    tol: f64,
}

impl MapArgs {
    fn load_map(&self) -> Result<GraphMap> {
        match (&self.file, self.seed) {
            (Some(path), _) => Ok(io::parse_graph_map(&read(path)?)?),
            (None, Some(seed)) => Ok(fixtures::random_train_track(seed, 8)),
            (None, None) => bail!("no graph map given"),
        }
    }

    fn options(&self, f: &GraphMap) -> Result<(Options, Vec<CohomologyClass>)> {
        let g = f.graph();
        let root = match &self.root {
            Some(name) => Some(g.vertex_index(name).ok_or_else(|| anyhow!("unknown vertex `{name}`"))?),
            None => None,
        };
        let tree = match &self.tree {
            Some(ids) => Some(
                ids.iter()
                    .filter(|s| !s.is_empty())
                    .map(|id| g.edge_index(id).ok_or_else(|| anyhow!("unknown edge `{id}`")))
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let classes = match &self.classes {
            Some(path) => io::parse_classes(&read(path)?, f)?,
            None => Vec::new(),
        };
        let (characters, variables) = match &self.coords {
            Some(path) => {
                let c = io::parse_coords(&read(path)?)?;
                let chars = c
                    .characters
                    .iter()
                    .map(|n| {
                        classes
                            .iter()
                            .find(|k| k.label() == *n)
                            .cloned()
                            .ok_or_else(|| anyhow!("character `{n}` is not in the classes file"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                (Some(chars), c.variables)
            }
            None => (None, None),
        };
        let opts = Options { root, tree, characters, variables, check_routes: false, perturb_arc: None };
        Ok((opts, classes))
    }

    fn setup(&self) -> Result<Setup> {
        let map = self.load_map()?;
        map.validate().map_err(Error::Validation)?;
        map.check_dynamics()?;
        let (opts, classes) = self.options(&map)?;
        let marked = MarkedAbelianization::new(&map, opts.root, opts.tree.as_deref())?;
        let chars = opts.characters.clone().unwrap_or_else(|| marked.standard_characters());
        let mut coords = marked.make_coordinates(&chars)?;
        if let Some(names) = opts.variables {
            coords = CoordinateSystem::new(names, coords.matrix().to_vec())?;
        }
        let labeled = LabeledTransitionGraph::build(&marked);
        Ok(Setup { map, marked, labeled, coords, classes, tol: self.tol })
    }
}

impl Setup {
    fn names(&self) -> Vec<String> {
        self.coords.names().to_vec()
    }

    fn polynomial(&self) -> LaurentPoly {
        self.coords.poly_to_coords(&det_polynomial(&self.labeled))
    }

    fn orbit_classes(&self) -> Vec<(Vec<String>, Vec<i64>)> {
        let g = self.map.graph();
        self.labeled
            .circuits()
            .iter()
            .map(|y| {
                let edges = y.nodes.iter().map(|&e| g.edge_id(e).to_string()).collect();
                (edges, self.coords.apply(&self.labeled.orbit_class(y)))
            })
            .collect()
    }

    fn fried(&self) -> Result<OpenCone> {
        let classes: Vec<Vec<i64>> = self.orbit_classes().into_iter().map(|(_, c)| c).collect();
        Ok(fried_cone(&classes, self.coords.dim(), Some(self.names()))?)
    }

    fn mcmullen(&self, p: &LaurentPoly) -> Result<OpenCone> {
        Ok(mcmullen_cone(p, Some(&self.coords.fibration_class()), Some(self.names()))?)
    }

    /// A class by name (from the classes file) or as integer coordinates.
    fn class(&self, spec: &str) -> Result<(String, Vec<i64>)> {
        if let Some(c) = self.classes.iter().find(|c| c.label() == spec) {
            let h = self.marked.class_on_h(c)?;
            let coords = self
                .coords
                .covector_to_coords(&h)
                .iter()
                .map(|x| {
                    if !x.is_integer() {
                        bail!("class `{spec}` is not integral in these coordinates");
                    }
                    i64::try_from(x.to_integer()).map_err(|_| anyhow!("class `{spec}` is too large"))
                })
                .collect::<Result<Vec<i64>>>()?;
            return Ok((spec.to_string(), coords));
        }
        let coords = spec
            .split(',')
            .map(|s| s.trim().parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| anyhow!("`{spec}` is neither a known class nor integer coordinates"))?;
        if coords.len() != self.coords.dim() {
            bail!("class `{spec}` has {} coordinates; expected {}", coords.len(), self.coords.dim());
        }
        Ok((spec.to_string(), coords))
    }
}

fn poly_json(p: &LaurentPoly, names: &[String]) -> Value {
    serde_json::to_value(PolynomialJson::from_poly(p, names)).unwrap()
}

fn cone_text(c: &OpenCone) -> String {
    let rows: Vec<String> = c
        .inequalities()
        .iter()
        .map(|r| {
            let mut lhs = String::new();
            for (k, n) in r.iter().zip(c.names()).filter(|(k, _)| **k != 0) {
                let sign = if *k < 0 { "-" } else if lhs.is_empty() { "" } else { "+" };
                let sep = if lhs.is_empty() { "" } else { " " };
                let mag = if k.abs() == 1 { String::new() } else { k.abs().to_string() };
                let space = if lhs.is_empty() || sign.is_empty() { "" } else { " " };
                lhs.push_str(&format!("{sep}{sign}{space}{mag}{n}"));
            }
            format!("{lhs} > 0")
        })
        .collect();
    let mut text = rows.join(", ");
    if let Some(rays) = c.rays_2d() {
        text.push_str(&format!("; rays {rays:?}"));
    }
    text
}

fn out(text: &str) {
    use std::io::Write;
    // a closed pipe is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn emit(json_mode: bool, command: &str, value: Value, text: impl FnOnce() -> String) {
    if json_mode {
        let mut v = json!({ "schema": SCHEMA, "command": command });
        if let (Value::Object(dst), Value::Object(src)) = (&mut v, value) {
            dst.extend(src);
        }
        out(&serde_json::to_string_pretty(&v).unwrap());
    } else {
        out(&text());
    }
}

fn run(cli: Cli) -> Result<()> {
    let js = cli.json;
    match cli.command {
        Command::Validate(args) => {
            let f = args.load_map()?;
            f.validate().map_err(Error::Validation)?;
            f.check_dynamics()?;
            emit(
                js,
                "validate",
                json!({"valid": true, "vertices": f.graph().num_vertices(), "edges": f.num_edges(),
                       "transition_matrix": f.transition_matrix().to_i64_rows()}),
                || format!("ok: {} vertices, {} edges, expanding irreducible train track", f.graph().num_vertices(), f.num_edges()),
            );
        }
        Command::Polynomial { map, route } => {
            let s = map.setup()?;
            let names = s.names();
            let det = s.polynomial();
            let cyc = || s.coords.poly_to_coords(&cycle_polynomial(&s.labeled));
            let (p, label, agree) = match route {
                RouteArg::Det => (det, "det", None),
                RouteArg::Cycle => (cyc(), "cycle", None),
                RouteArg::Both => {
                    let c = cyc();
                    let same = c == det;
                    (det, "both", Some(same))
                }
            };
            emit(
                js,
                "polynomial",
                json!({"route": label, "routes_agree": agree, "polynomial": poly_json(&p, &names)}),
                || {
                    let mut out = p.format_with(&names);
                    if let Some(a) = agree {
                        out.push_str(if a { "\n(det and cycle routes agree)" } else { "\n(det and cycle routes DISAGREE)" });
                    }
                    out
                },
            );
            if agree == Some(false) {
                return Err(Mismatch("determinant and cycle routes disagree".into()).into());
            }
        }
        Command::Orbits(map) => {
            let s = map.setup()?;
            let orbits = s.orbit_classes();
            emit(
                js,
                "orbits",
                json!({"coordinates": s.names(),
                       "orbits": orbits.iter().map(|(e, c)| json!({"edges": e, "class": c})).collect::<Vec<_>>()}),
                || orbits.iter().map(|(e, c)| format!("{:<20} {:?}", e.join(" "), c)).collect::<Vec<_>>().join("\n"),
            );
        }
        Command::Cones { map, check_equal } => {
            let s = map.setup()?;
            let mc = s.mcmullen(&s.polynomial())?;
            let fc = s.fried()?;
            let cmp = if check_equal { Some(cones_equal(&mc, &fc)?) } else { None };
            let (mmin, fmin) = (mc.minimize(), fc.minimize());
            let witness = cmp.as_ref().and_then(|c| c.witness().map(|w| w.iter().map(|x| x.to_string()).collect::<Vec<_>>()));
            emit(
                js,
                "cones",
                json!({"mcmullen": ConeJson::from_cone(&mmin), "fried": ConeJson::from_cone(&fmin),
                       "equal": cmp.as_ref().map(|c| c.equal), "witness": witness}),
                || {
                    let mut out = format!("McMullen: {}\nFried:    {}", cone_text(&mmin), cone_text(&fmin));
                    if let Some(c) = &cmp {
                        out.push_str(if c.equal { "\ncones are equal" } else { "\ncones DIFFER" });
                        if let Some(w) = &witness {
                            out.push_str(&format!("; witness ({})", w.join(", ")));
                        }
                    }
                    out
                },
            );
            if let Some(c) = cmp {
                if !c.equal {
                    return Err(Mismatch("McMullen and Fried cones differ".into()).into());
                }
            }
        }
        Command::Specialize(args) => {
            let s = args.map.setup()?;
            let (name, u) = s.class(&args.class)?;
            let p = specialize(&s.polynomial(), &u)?.unit_normalize()?;
            let z = vec!["z".to_string()];
            emit(
                js,
                "specialize",
                json!({"class": name, "coordinates": u, "specialization": poly_json(&p, &z)}),
                || format!("{name} {u:?}: {}", p.format_with(&z)),
            );
        }
        Command::Stretch(args) => {
            let s = args.map.setup()?;
            let (name, u) = s.class(&args.class)?;
            let p = s.polynomial();
            let st = stretch(&s.labeled, &s.coords, &s.fried()?, &u, Some(&p), s.tol)?;
            emit(
                js,
                "stretch",
                json!({"class": name, "coordinates": u, "stretch": st.value, "entropy": st.entropy,
                       "largest_root": st.sturm, "tolerance": s.tol, "route": "pf-level-set+sturm"}),
                || format!("{name} {u:?}: stretch {:.10} (largest root {:.10}), tol {:e}", st.value, st.sturm.unwrap_or(f64::NAN), s.tol),
            );
        }
        Command::Entropy { class, samples } => {
            let s = class.map.setup()?;
            let (name, u) = s.class(&class.class)?;
            let cone = s.fried()?;
            let uf: Vec<f64> = u.iter().map(|&x| x as f64).collect();
            let h = entropy(&s.labeled, &s.coords, &cone, &uf, s.tol)?;
            let base: Vec<f64> = s.coords.fibration_class().iter().map(|&x| x as f64).collect();
            let mut profile = Vec::new();
            for k in 1..=samples {
                let w = k as f64 / samples as f64;
                let p: Vec<f64> = base.iter().zip(&uf).map(|(a, b)| (1.0 - w) * a + w * b).collect();
                let v = entropy(&s.labeled, &s.coords, &cone, &p, s.tol)?.value;
                profile.push((p, v));
            }
            emit(
                js,
                "entropy",
                json!({"class": name, "coordinates": u, "entropy": h.value, "tolerance": h.tolerance,
                       "sign_changes": h.sign_changes,
                       "samples": profile.iter().map(|(p, v)| json!({"point": p, "entropy": v})).collect::<Vec<_>>()}),
                || {
                    let mut out = format!("{name} {u:?}: entropy {:.12}, tol {:e}", h.value, h.tolerance);
                    for (p, v) in &profile {
                        out.push_str(&format!("\n  {p:?}: {v:.12}"));
                    }
                    out
                },
            );
        }
        Command::Subdivide { map, point } => {
            let s = map.setup()?;
            let g = s.map.graph();
            let specs = point
                .iter()
                .map(|p| {
                    let (edge, chain) = p.split_once(':').ok_or_else(|| anyhow!("point `{p}` is not EDGE:POS[,POS..]"))?;
                    let host = g.edge_index(edge).ok_or_else(|| anyhow!("unknown edge `{edge}`"))?;
                    let chain = chain
                        .split(',')
                        .map(|x| x.trim().parse::<usize>().map_err(|_| anyhow!("bad position `{x}` in `{p}`")))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(PeriodicPointSpec { host, chain })
                })
                .collect::<Result<Vec<_>>>()?;
            let sub = s.map.subdivide_at_invariant_set(&specs)?;
            let chars: Vec<CohomologyClass> = match &map.coords {
                Some(_) => map.options(&s.map)?.0.characters.unwrap(),
                None => s.marked.standard_characters(),
            };
            let check = check_subdivision(&s.marked, &sub, &chars)?;
            let names = s.names();
            let b = s.labeled.subdivision_factor(&sub.orbit)?;
            let entries: Vec<Vec<String>> = (0..b.size())
                .map(|i| (0..b.size()).map(|j| s.coords.poly_to_coords(b.get(i, j)).format_with(&names)).collect())
                .collect();
            emit(
                js,
                "subdivide",
                json!({"map": GraphMapJson::from_map(&sub.map), "orbit_length": sub.orbit.len(), "b_matrix": entries,
                       "factor": poly_json(&check.factor, &names), "original": poly_json(&check.original, &names),
                       "subdivided": poly_json(&check.subdivided, &names), "holds": check.holds}),
                || {
                    format!(
                        "subdivided map has {} edges; orbit of length {}\nB = {:?}\ndet(xI - B) = {}\noriginal   {}\nsubdivided {}\nidentity {}",
                        sub.map.num_edges(),
                        sub.orbit.len(),
                        entries,
                        check.factor.format_with(&names),
                        check.original.format_with(&names),
                        check.subdivided.format_with(&names),
                        if check.holds { "holds" } else { "FAILS" }
                    )
                },
            );
            if !check.holds {
                return Err(Mismatch("subdivided polynomial is not the product".into()).into());
            }
        }
        Command::Endo { command: EndoCommand::Analyze { file, cap } } => {
            let e = io::parse_endo(&read(&file)?)?;
            let folded = e.fold();
            let (index, ranks) = e.stable_image_index(cap)?;
            emit(
                js,
                "endo analyze",
                json!({"endomorphism": EndoJson::from_endo(&e), "injective": e.is_injective(),
                       "surjective": e.is_surjective(), "image_rank": e.image_rank(),
                       "folded": {"vertices": folded.num_vertices(), "edges": folded.edges().len()},
                       "stable_image_index": index, "rank_sequence": ranks}),
                || {
                    format!(
                        "{e}\ninjective: {}\nsurjective: {}\nimage rank: {}\nfolded graph: {} vertices, {} edges\nstable image index {index}, ranks {ranks:?}",
                        e.is_injective(),
                        e.is_surjective(),
                        e.image_rank(),
                        folded.num_vertices(),
                        folded.edges().len()
                    )
                },
            );
        }
        Command::Analyze { map, check, perturb_arc } => {
            let f = map.load_map()?;
            let (mut opts, classes) = map.options(&f)?;
            opts.check_routes = check;
            opts.perturb_arc = perturb_arc;
            let r = report::analyze(&f, &opts)?;
            let names = r.coords.names().to_vec();
            let fried = r.fried_cone.clone();
            let mut stretches = Vec::new();
            for c in &classes {
                let h = r.marked.class_on_h(c)?;
                let u: Option<Vec<i64>> = r
                    .coords
                    .covector_to_coords(&h)
                    .iter()
                    .map(|x| if x.is_integer() { i64::try_from(x.to_integer()).ok() } else { None })
                    .collect();
                let Some(u) = u else { continue };
                if !fried.contains_int(&u)? {
                    stretches.push((c.label(), u, None));
                    continue;
                }
                let st = stretch(&r.labeled, &r.coords, &fried, &u, Some(&r.polynomial), map.tol)?;
                stretches.push((c.label(), u, Some(st)));
            }
            emit(
                js,
                "analyze",
                json!({"b": r.marked.b(), "coordinates": names,
                       "polynomial": poly_json(&r.polynomial, &names), "routes_agree": r.routes_agree(),
                       "orbits": r.orbits.iter().map(|o| json!({"edges": o.edges, "class": o.class})).collect::<Vec<_>>(),
                       "mcmullen_cone": ConeJson::from_cone(&r.mcmullen_cone), "fried_cone": ConeJson::from_cone(&fried),
                       "cones_equal": r.comparison.equal, "tolerance": map.tol,
                       "classes": stretches.iter().map(|(n, u, st)| json!({
                           "name": n, "coordinates": u, "in_cone": st.is_some(),
                           "stretch": st.as_ref().map(|s| s.value), "largest_root": st.as_ref().and_then(|s| s.sturm)
                       })).collect::<Vec<_>>()}),
                || {
                    let mut out = format!(
                        "b = {}\npolynomial: {}\n{} circuits\ncone: {}",
                        r.marked.b(),
                        r.polynomial.format_with(&names),
                        r.orbits.len(),
                        cone_text(&r.mcmullen_cone)
                    );
                    if let Some(a) = r.routes_agree() {
                        out.push_str(&format!("\nroutes agree: {a}"));
                    }
                    for (n, u, st) in &stretches {
                        match st {
                            Some(st) => out.push_str(&format!("\n{n} {u:?}: stretch {:.10}", st.value)),
                            None => out.push_str(&format!("\n{n} {u:?}: outside the cone")),
                        }
                    }
                    out
                },
            );
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Mismatch>().is_some() {
        return 3;
    }
    let core = err.downcast_ref::<Error>().or_else(|| err.downcast_ref::<StageError>().map(|e| &e.error));
    match core {
        Some(Error::Validation(_) | Error::Dynamics(_)) => 2,
        Some(Error::IdentityCheck(_)) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let js = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code(&err);
            if js {
                let v = json!({"schema": SCHEMA, "error": format!("{err:#}"), "exit_code": code});
                out(&serde_json::to_string_pretty(&v).unwrap());
            }
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
