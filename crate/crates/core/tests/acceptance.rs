//! Acceptance gate: one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trainpoly::cones::{cones_equal, fried_cone, mcmullen_cone};
use trainpoly::graphcore::PeriodicPointSpec;
use trainpoly::io::PolynomialJson;
use trainpoly::mcpoly::{check_subdivision, cycle_polynomial, det_polynomial, mcmullen_cycle, mcmullen_det};
use trainpoly::spectral::{entropy, largest_real_root, pf_eigen_matrix, specialize};
use trainpoly::{fixtures, CohomologyClass, FreeGroupEndo, LabeledTransitionGraph, LaurentPoly, MarkedAbelianization};

const ROOT_TOL: f64 = 1e-4;
const ORACLE_TOL: f64 = 1e-9;
const ENTROPY_TOL: f64 = 1e-9;
const SOLVE_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn names() -> Vec<String> {
    vec!["t".into(), "x".into()]
}

fn zeta(terms: &[(i64, i64)]) -> LaurentPoly {
    LaurentPoly::from_terms(1, terms.iter().map(|&(e, c)| (vec![e], c)))
}

struct Running {
    m: MarkedAbelianization,
    l: LabeledTransitionGraph,
    coords: trainpoly::CoordinateSystem,
}

fn running() -> Running {
    let m = fixtures::running_marked();
    let l = LabeledTransitionGraph::build(&m);
    let coords = fixtures::running_coordinates(&m);
    Running { m, l, coords }
}

fn polynomial_exact() -> Outcome {
    let start = Instant::now();
    let r = running();
    let det = mcmullen_det(&r.l, &r.coords);
    let cyc = mcmullen_cycle(&r.l, &r.coords);
    let elapsed = start.elapsed();
    let want = fixtures::running_polynomial();
    let bytes = |p: &LaurentPoly| serde_json::to_string(&PolynomialJson::from_poly(p, &names())).unwrap();
    ensure!(det == want, "det route gave {}", det.format_with(&names()));
    ensure!(cyc == want, "cycle route gave {}", cyc.format_with(&names()));
    ensure!(bytes(&det) == bytes(&cyc), "serialized terms differ");
    ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    Ok(format!("𝔪 = {} by both routes in {elapsed:.2?}", det.format_with(&names())))
}

fn routes_agree() -> Outcome {
    let r = running();
    ensure!(det_polynomial(&r.l) == cycle_polynomial(&r.l), "running example");
    let mut max_b = 0;
    for seed in 0..100 {
        let f = fixtures::random_train_track(seed, 8);
        ensure!(f.num_edges() <= 8, "seed {seed} has {} edges", f.num_edges());
        let m = MarkedAbelianization::new(&f, None, None).map_err(|e| format!("seed {seed}: {e}"))?;
        let l = LabeledTransitionGraph::build(&m);
        ensure!(det_polynomial(&l) == cycle_polynomial(&l), "routes differ at seed {seed}");
        max_b = max_b.max(m.b());
    }
    Ok(format!("running example + 100 random maps (b up to {max_b})"))
}

fn orbit_classes() -> Outcome {
    let r = running();
    let circuits = r.l.circuits();
    let mut got: Vec<Vec<i64>> = circuits.iter().map(|y| r.coords.apply(&r.l.orbit_class(y))).collect();
    got.sort();
    let mut want = fixtures::running_orbit_classes();
    want.sort();
    ensure!(got == want, "classes {got:?}");
    for y in &circuits {
        // p_y from the arc labels directly, then p_y⁻¹ x^{|y|}
        let mut e = vec![0i64; r.l.b()];
        for &k in &y.arcs {
            for (x, l) in e.iter_mut().zip(&r.l.arcs()[k].label) {
                *x -= l;
            }
        }
        e[r.l.b() - 1] = y.len() as i64;
        ensure!(LaurentPoly::monomial(e.clone(), 1) == r.l.orbit_monomial(y), "monomial mismatch on {:?}", y.nodes);
        ensure!(e == r.l.orbit_class(y), "class {:?} vs p_y⁻¹x^|y| {:?}", r.l.orbit_class(y), e);
    }
    Ok(format!("{} circuits, classes {:?}", circuits.len(), got))
}

fn cones_match() -> Outcome {
    let mc = mcmullen_cone(&fixtures::running_polynomial(), None, Some(names())).map_err(|e| e.to_string())?;
    let fc = fried_cone(&fixtures::running_orbit_classes(), 2, Some(names())).map_err(|e| e.to_string())?;
    let cmp = cones_equal(&mc, &fc).map_err(|e| e.to_string())?;
    ensure!(cmp.equal, "cones differ, witness {:?}", cmp.witness());
    let minimal = vec![vec![-2, 1], vec![0, 1]];
    ensure!(mc.minimize().inequalities() == minimal.as_slice(), "McMullen minimal {:?}", mc.minimize().inequalities());
    ensure!(fc.minimize().inequalities() == minimal.as_slice(), "Fried minimal {:?}", fc.minimize().inequalities());
    for u in [[0, 1], [-1, 2], [-1, 1]] {
        ensure!(mc.contains_int(&u).unwrap() && fc.contains_int(&u).unwrap(), "{u:?} should be inside");
    }
    for u in [[1, 1], [1, 2]] {
        ensure!(!mc.contains_int(&u).unwrap() && !fc.contains_int(&u).unwrap(), "{u:?} should be outside");
    }
    Ok("{ω > 0, ω > 2σ} from both sides; membership as expected".into())
}

fn specializations() -> Outcome {
    let p = fixtures::running_polynomial();
    let s1 = specialize(&p, &[-1, 2]).and_then(|s| s.unit_normalize()).map_err(|e| e.to_string())?;
    let s2 = specialize(&p, &[-1, 1]).and_then(|s| s.unit_normalize()).map_err(|e| e.to_string())?;
    ensure!(s1 == zeta(&[(9, 1), (5, -1), (4, -1), (3, -1), (2, -1), (1, -1), (0, -2)]), "u1: {s1:?}");
    ensure!(s2 == zeta(&[(6, 1), (3, -3), (1, -3), (0, -1)]), "u2: {s2:?}");
    let r1 = largest_real_root(&s1, SOLVE_TOL).map_err(|e| e.to_string())?;
    let r2 = largest_real_root(&s2, SOLVE_TOL).map_err(|e| e.to_string())?;
    ensure!((r1 - 1.35827).abs() < ROOT_TOL, "u1 root {r1}");
    ensure!((r2 - 1.632992).abs() < ROOT_TOL, "u2 root {r2}");
    Ok(format!("roots {r1:.6}, {r2:.6} (tol {ROOT_TOL:e})"))
}

fn consistency_oracle() -> Outcome {
    let p = fixtures::running_polynomial();
    let sturm = largest_real_root(&specialize(&p, &[0, 1]).map_err(|e| e.to_string())?, SOLVE_TOL)
        .map_err(|e| e.to_string())?;
    let a = running().l.evaluate_at_one().to_f64_rows();
    let pf = pf_eigen_matrix(&a, SOLVE_TOL).map_err(|e| e.to_string())?;
    let diff = (sturm - pf.value).abs();
    ensure!(diff < ORACLE_TOL, "Sturm {sturm} vs PF {}", pf.value);
    Ok(format!("λ = {sturm:.12}, |Δ| = {diff:.1e} (tol {ORACLE_TOL:e})"))
}

fn subdivision() -> Outcome {
    let r = running();
    let f = r.m.map();
    let d = f.graph().edge_index("d").unwrap();
    let sub = f
        .subdivide_at_invariant_set(&[PeriodicPointSpec { host: d, chain: vec![3] }])
        .map_err(|e| e.to_string())?;
    let b = r.l.subdivision_factor(&sub.orbit).map_err(|e| e.to_string())?;
    ensure!(b.size() == 1, "B has size {}", b.size());
    let b00 = r.coords.poly_to_coords(b.get(0, 0));
    ensure!(b00 == LaurentPoly::monomial(vec![2, 0], 1), "B = {}", b00.format_with(&names()));
    let check = check_subdivision(&r.m, &sub, &fixtures::running_characters()).map_err(|e| e.to_string())?;
    let x_minus_t2 = LaurentPoly::from_terms(2, [(vec![0, 1], 1), (vec![2, 0], -1)]);
    ensure!(check.factor == x_minus_t2, "factor {}", check.factor.format_with(&names()));
    ensure!(check.holds, "𝔪′ = {}", check.subdivided.format_with(&names()));

    let mut done = 0;
    let mut seed = 0u64;
    while done < 20 {
        ensure!(seed < 2000, "only {done} random orbits found");
        let f = fixtures::random_train_track(seed, 6);
        seed += 1;
        let Some(spec) = fixtures::random_periodic_point(&f, seed) else { continue };
        let sub = f.subdivide_at_invariant_set(&[spec]).map_err(|e| e.to_string())?;
        let m = MarkedAbelianization::new(&f, None, None).map_err(|e| e.to_string())?;
        let check = check_subdivision(&m, &sub, &m.standard_characters())
            .map_err(|e| format!("seed {}: {e}", seed - 1))?;
        ensure!(check.holds, "identity fails at seed {}", seed - 1);
        done += 1;
    }
    Ok(format!("B = t², 𝔪′ = 𝔪·(x − t²); {done} random orbits"))
}

fn stallings() -> Outcome {
    let p1 = fixtures::phi1();
    let p2 = fixtures::phi2();
    ensure!(p1.is_injective() && !p1.is_surjective(), "φ1 flags wrong");
    ensure!(p2.is_injective() && p2.is_surjective(), "φ2 flags wrong");
    let id = FreeGroupEndo::identity(4);
    ensure!(id.is_injective() && id.is_surjective(), "identity flags wrong");
    for seed in 0..50 {
        let e = fixtures::random_endo(seed, 2 + (seed % 3) as usize, 4);
        let (_, ranks) = e.stable_image_index(20).map_err(|err| format!("seed {seed}: {err}"))?;
        ensure!(ranks.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: ranks {ranks:?}");
    }
    Ok("φ1 injective, not surjective; φ2 automorphism; identity automorphism; 50 rank sequences".into())
}

fn entropy_properties() -> Outcome {
    let r = running();
    let cone = fried_cone(&fixtures::running_orbit_classes(), 2, None).unwrap();
    let h = |u: &[f64]| entropy(&r.l, &r.coords, &cone, u, SOLVE_TOL).map(|e| e.value).map_err(|e| e.to_string());
    let mut worst_hom: f64 = 0.0;
    for u in [[0.0, 1.0], [-1.0, 2.0], [-1.0, 1.0]] {
        let base = h(&u)?;
        for q in [1.0 / 3.0, 0.5, 2.0, 3.0] {
            let err = (q * h(&[q * u[0], q * u[1]])? - base).abs();
            worst_hom = worst_hom.max(err);
            ensure!(err < ENTROPY_TOL, "homogeneity at {u:?}, q = {q}: {err:e}");
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sample = || {
        let s: f64 = rng.gen_range(-2.0..2.0);
        let w = s.max(0.0) * 2.0 + rng.gen_range(0.05..3.0);
        [s, w]
    };
    let mut worst_gap = f64::INFINITY;
    for _ in 0..50 {
        let (u, v) = (sample(), sample());
        let mid = [0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])];
        let gap = 1.0 / h(&mid)? - 0.5 * (1.0 / h(&u)? + 1.0 / h(&v)?);
        worst_gap = worst_gap.min(gap);
        ensure!(gap > -ENTROPY_TOL, "1/ℌ not concave at {u:?}, {v:?}: {gap:e}");
    }
    let mut prev = 0.0;
    let mut eps = 1.0;
    while eps >= 1.0 / 16.0 {
        let v = h(&[1.0, 2.0 + eps])?;
        ensure!(v > prev, "ℌ(1, 2 + {eps}) = {v} is not above {prev}");
        prev = v;
        eps /= 2.0;
    }
    Ok(format!("homogeneity err ≤ {worst_hom:.1e}, min concavity gap {worst_gap:.1e}, ℌ(1, 2+1/16) = {prev:.4}"))
}

fn gauge_invariance() -> Outcome {
    let r = running();
    let want = det_polynomial(&r.l);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..20 {
        let omega: Vec<Vec<i64>> =
            (0..r.l.num_nodes()).map(|_| (0..r.l.b() - 1).map(|_| rng.gen_range(-3..=3)).collect()).collect();
        ensure!(det_polynomial(&r.l.gauged(&omega)) == want, "gauge {k} ({omega:?}) changes 𝔪");
    }

    let f = r.m.map();
    let a = f.graph().edge_index("a").unwrap();
    let root = f.graph().vertex_index("R");
    for k in 0..20 {
        let mut perm: Vec<usize> = (0..f.num_edges()).collect();
        perm.shuffle(&mut rng);
        let g = fixtures::relabel_edges(f, &perm);
        let new_a = perm.iter().position(|&e| e == a).unwrap();
        let m = MarkedAbelianization::new(&g, root, Some(&[new_a])).map_err(|e| e.to_string())?;
        let chars: Vec<CohomologyClass> = fixtures::running_characters()
            .into_iter()
            .map(|c| {
                let values = perm.iter().map(|&e| c.edge_values[e].clone()).collect();
                CohomologyClass::new(c.name.as_deref(), values, c.stable_value.clone())
            })
            .collect();
        let coords = m.make_coordinates(&chars).map_err(|e| e.to_string())?;
        let p = mcmullen_det(&LabeledTransitionGraph::build(&m), &coords);
        ensure!(p == fixtures::running_polynomial(), "relabeling {k} ({perm:?}) gives {}", p.format_with(&names()));
    }

    // root change: internal coordinates at L against those at R
    let m_l = MarkedAbelianization::new(f, f.graph().vertex_index("L"), Some(&[a])).map_err(|e| e.to_string())?;
    let n = r.m.b() - 1;
    let t: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| r.m.project(&m_l.section_cycle(j))[i]).collect())
        .collect();
    let chars_l: Vec<CohomologyClass> =
        fixtures::running_characters().iter().map(|c| c.rebased(&r.m, &m_l)).collect();
    let coords_l = m_l.make_coordinates(&chars_l).map_err(|e| e.to_string())?;
    let mut x_l = vec![0; n + 1];
    x_l[n] = 1;
    let x_in_r = r.coords.unapply(&coords_l.apply(&x_l));
    ensure!(x_in_r[n] == 1, "stable letter at L is {x_in_r:?} at R");
    let v = &x_in_r[..n];
    // exponent (a, k) at L becomes (T a + k v, k) at R
    let mut change: Vec<Vec<i64>> = t.iter().enumerate().map(|(i, row)| {
        let mut row = row.clone();
        row.push(v[i]);
        row
    }).collect();
    let mut last = vec![0; n + 1];
    last[n] = 1;
    change.push(last);
    let p_l = det_polynomial(&LabeledTransitionGraph::build(&m_l));
    let substituted = p_l.linear_change(&change);
    ensure!(substituted.equal_up_to_units(&want), "substitution x ↦ x·t^{v:?} does not match");
    let identity_t = (0..n).all(|i| (0..n).all(|j| t[i][j] == (i == j) as i64));
    ensure!(identity_t, "H₀ identification also changed: {t:?}");
    Ok(format!("20 gauges, 20 relabelings; root R → L is x ↦ x·t^{v:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("McMullen polynomial, exact", polynomial_exact),
        ("route equivalence", routes_agree),
        ("orbit classes", orbit_classes),
        ("cone equality", cones_match),
        ("specializations", specializations),
        ("consistency oracle", consistency_oracle),
        ("subdivision identity", subdivision),
        ("Stallings", stallings),
        ("entropy properties", entropy_properties),
        ("gauge invariance", gauge_invariance),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let start = Instant::now();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", k + 1)
            }
        }
    }
    println!("{} of {} criteria passed in {:.1?}", criteria.len() - failed, criteria.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
