//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use spinlattice::dynamics::{
    clustering_sweep, commutator_sweep, heisenberg_evolve, taylor_evolve, velocity_estimate, volume_convergence,
    LrBoundParams, VelocityEstimate,
};
use spinlattice::gns::{commutant_dimension, gns_construct, purity_irreducibility_crosscheck};
use spinlattice::models::{heisenberg_xxz, ising, local_hamiltonian, Interaction};
use spinlattice::sampling::{self, OperatorKind, SeededRng};
use spinlattice::states::{
    free_energy, ground_state_residual, passivity_check, polarization, polarization_gap, relative_entropy,
    DensityState, Thermal,
};
use spinlattice::tensorcore::{commutator, hermitian_eig, max_abs, pauli, scale, trace, trace_product, ComplexMatrix};
use spinlattice::toric::{PauliString, ToricLattice};
use spinlattice::{c64, Axis, LocalOperator, Region, Site};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|err| err.to_string())
}

fn xxz() -> Interaction {
    heisenberg_xxz(1.0, 1.0, 0.5, 0.3)
}

fn z_at(i: i64) -> LocalOperator {
    LocalOperator::pauli_at(Site::line(i), Axis::Z)
}

/// Random operator on one or two neighbouring sites of `0..n`.
fn random_local(rng: &mut SeededRng, n: i64, hermitian: bool) -> LocalOperator {
    let kind = if hermitian { OperatorKind::Hermitian } else { OperatorKind::General };
    sampling::random_block_operator(rng, &Region::chain(n as usize), 2, kind, 2)
}

fn pauli_algebra() -> Outcome {
    let mut worst = 0.0f64;
    for (ia, a) in Axis::ALL.iter().enumerate() {
        for (ib, b) in Axis::ALL.iter().enumerate() {
            let got = &pauli(*a) * &pauli(*b) - &pauli(*b) * &pauli(*a);
            let mut want = ComplexMatrix::zeros(2, 2);
            for (ic, c) in Axis::ALL.iter().enumerate() {
                // Levi-Civita symbol for (ia, ib, ic) a permutation of (0, 1, 2)
                let eps = ((ib as i64 - ia as i64) * (ic as i64 - ia as i64) * (ic as i64 - ib as i64)).signum();
                want += scale(&pauli(*c), c64::new(0.0, 2.0 * eps as f64));
            }
            worst = worst.max(max_abs(&(got - want)));
        }
    }
    ensure(worst <= 1e-15, || format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:e} over 9 commutators"))
}

fn diag_state(values: &[f64]) -> DensityState {
    let n = values.len();
    let rho = ComplexMatrix::from_fn(n, n, |i, j| if i == j { c64::new(values[i], 0.0) } else { c64::new(0.0, 0.0) });
    DensityState::new(Region::chain(1), rho).expect("diagonal state")
}

fn gns_examples() -> Outcome {
    let pure = e(gns_construct(2, &diag_state(&[1.0, 0.0])))?;
    let (g1, c1) = (pure.gns_dim(), e(commutant_dimension(&pure))?);
    ensure((g1, c1) == (2, 1), || format!("A11 state gave gns {g1}, commutant {c1}"))?;
    let sigma = diag_state(&[0.3, 0.7]);
    let mixed = e(gns_construct(2, &sigma))?;
    let (g2, c2) = (mixed.gns_dim(), e(commutant_dimension(&mixed))?);
    ensure((g2, c2) == (4, 4), || format!("mixed state gave gns {g2}, commutant {c2}"))?;
    let mut rng = sampling::rng(2);
    let mut worst = 0.0f64;
    for (rep, omega) in [(&pure, diag_state(&[1.0, 0.0])), (&mixed, sigma)] {
        for _ in 0..100 {
            let a = sampling::random_matrix(&mut rng, 2);
            let direct = trace_product(omega.matrix(), &a);
            worst = worst.max((e(rep.vector_state(&a))? - direct).norm());
        }
    }
    ensure(worst <= 1e-10, || format!("reconstruction residual {worst:e}"))?;
    Ok(format!("(2,1) and (4,4); reconstruction residual {worst:e}"))
}

fn purity_irreducibility() -> Outcome {
    let mut rng = sampling::rng(3);
    let (mut pure, mut mixed) = (0, 0);
    for k in 0..200 {
        // alternate generic mixed states with rank-one states
        let rho = if k % 2 == 0 {
            sampling::random_density(&mut rng, 2)
        } else {
            let g = sampling::random_matrix(&mut rng, 2);
            let psi = ComplexMatrix::from_fn(2, 1, |i, _| g[(i, 0)]);
            e(DensityState::pure(Region::chain(1), &psi))?.matrix().clone()
        };
        let omega = e(DensityState::new(Region::chain(1), rho))?;
        let (is_pure, dim) = e(purity_irreducibility_crosscheck(2, &omega))?;
        ensure(is_pure == (dim == 1), || format!("sample {k}: pure {is_pure}, commutant {dim}"))?;
        if is_pure {
            pure += 1;
        } else {
            mixed += 1;
        }
    }
    ensure(pure > 0 && mixed > 0, || format!("degenerate sample: {pure} pure, {mixed} mixed"))?;
    Ok(format!("200 states ({pure} pure, {mixed} mixed), no exceptions"))
}

fn kms() -> Outcome {
    let region = Region::chain(8);
    let h = e(local_hamiltonian(&xxz(), &region))?;
    let mut rng = sampling::rng(4);
    let pairs: Vec<(LocalOperator, LocalOperator)> =
        (0..50).map(|_| (random_local(&mut rng, 8, true), random_local(&mut rng, 8, true))).collect();
    let mut worst = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        let thermal = e(Thermal::new(&h, beta))?;
        for (a, b) in &pairs {
            for t in [0.0, 0.3, 1.0] {
                worst = worst.max(e(thermal.kms_residual(a, b, t))?);
            }
        }
    }
    ensure(worst <= 1e-8, || format!("Gibbs residual {worst:e}"))?;
    let mixed = DensityState::maximally_mixed(region, 2);
    let mut best = 0.0f64;
    for (a, b) in &pairs {
        for t in [0.0, 0.3, 1.0] {
            best = best.max(e(spinlattice::states::kms_residual_of_state(&mixed, &h, 1.0, a, b, t))?);
        }
    }
    ensure(best > 1e-2, || format!("maximally mixed state residual only {best:e}"))?;
    Ok(format!("Gibbs max residual {worst:e}; maximally mixed max residual {best:.3e}"))
}

fn free_energy_identity() -> Outcome {
    let region = Region::chain(3);
    let h = e(local_hamiltonian(&xxz(), &region))?;
    let mut rng = sampling::rng(5);
    let mut worst = 0.0f64;
    let mut min_gap = f64::INFINITY;
    let mut gibbs_dev = 0.0f64;
    for beta in [0.5, 1.0, 2.0] {
        let thermal = e(Thermal::new(&h, beta))?;
        let gibbs = thermal.state();
        let phi_beta = thermal.free_energy();
        gibbs_dev = gibbs_dev.max((e(free_energy(&gibbs, &h, beta))? - phi_beta).abs());
        for _ in 0..500 {
            let rho = e(DensityState::new(region.clone(), sampling::random_density(&mut rng, 8)))?;
            let srel = e(relative_entropy(&gibbs, &rho))?.value();
            let f = e(free_energy(&rho, &h, beta))?;
            worst = worst.max((srel - beta * (f - phi_beta)).abs());
            min_gap = min_gap.min(f - phi_beta);
        }
    }
    ensure(worst <= 1e-9, || format!("identity residual {worst:e}"))?;
    ensure(gibbs_dev <= 1e-9, || format!("F(rho_beta) - Phi(beta) = {gibbs_dev:e}"))?;
    ensure(min_gap >= -1e-9, || format!("a random state undercuts the Gibbs free energy by {min_gap:e}"))?;
    Ok(format!("identity residual {worst:e}; |F(rho_beta) - Phi| {gibbs_dev:e}; min F - Phi {min_gap:.3e}"))
}

fn window_eigenstate(h: &LocalOperator, k: usize) -> Result<DensityState, String> {
    let spec = e(hermitian_eig(h.matrix()))?;
    let psi = ComplexMatrix::from_fn(spec.dim(), 1, |i, _| spec.vectors[(i, k)]);
    e(DensityState::pure(h.support().clone(), &psi))
}

fn ground_state_criterion() -> Outcome {
    let region = Region::chain(6);
    let phi = xxz();
    let h = e(local_hamiltonian(&phi, &region))?;
    let ground = window_eigenstate(&h, 0)?;
    let excited = window_eigenstate(&h, 1)?;
    let mut rng = sampling::rng(6);
    let samples: Vec<LocalOperator> = (0..500).map(|_| random_local(&mut rng, 6, false)).collect();
    let residual = e(ground_state_residual(&ground, &phi, &samples))?;
    ensure(residual >= -1e-9, || format!("ground residual {residual:e}"))?;
    // |psi_0><psi_1| lowers the excited state to the ground state
    let spec = e(hermitian_eig(h.matrix()))?;
    let v = &spec.vectors;
    let lower = ComplexMatrix::from_fn(v.nrows(), v.nrows(), |i, j| v[(i, 0)] * v[(j, 1)].conj());
    let witness = e(LocalOperator::qubits(region, lower))?;
    let excited_residual = e(ground_state_residual(&excited, &phi, &[witness]))?;
    ensure(excited_residual < -1e-3, || format!("excited residual only {excited_residual:e}"))?;
    Ok(format!("ground min {residual:.3e}; excited witness {excited_residual:.6}"))
}

fn passivity() -> Outcome {
    let region = Region::chain(6);
    let phi = xxz();
    let h = e(local_hamiltonian(&phi, &region))?;
    let mut rng = sampling::rng(7);
    let unitaries: Vec<LocalOperator> =
        (0..500).map(|_| sampling::random_block_operator(&mut rng, &region, 2, OperatorKind::Unitary, 2)).collect();
    let mut worst = f64::INFINITY;
    for beta in [0.5, 2.0] {
        let gibbs = e(Thermal::new(&h, beta))?.state();
        worst = worst.min(e(passivity_check(&gibbs, &phi, &unitaries))?);
    }
    ensure(worst >= -1e-8, || format!("passivity min {worst:e}"))?;
    Ok(format!("min -i omega(U* delta U) = {worst:.3e} over 1000 checks"))
}

fn lieb_robinson() -> Outcome {
    let phi = xxz();
    let window = Region::chain(10);
    let params = e(LrBoundParams::for_interaction(&phi, 1.0, 2, "xxz"))?;
    let family: Vec<LocalOperator> = (1..10).map(z_at).collect();
    let grid: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
    let sweep = e(commutator_sweep(&phi, &window, &z_at(0), &family, &grid, &params))?;
    ensure(sweep.len() == 21 * 9, || format!("{} records", sweep.len()))?;
    for r in &sweep {
        ensure(r.empirical <= r.bound_rough, || {
            format!("t={} dist={}: {} > {}", r.t, r.dist, r.empirical, r.bound_rough)
        })?;
    }
    let at_one: Vec<f64> = (1..10)
        .map(|d| sweep.iter().find(|r| (r.t - 1.0).abs() < 1e-12 && r.dist == d).expect("grid point").empirical)
        .collect();
    ensure(at_one.windows(2).all(|w| w[1] < w[0]), || format!("no decay at t=1: {at_one:?}"))?;
    let threshold = 1e-2;
    match e(velocity_estimate(&sweep, threshold, &params))? {
        VelocityEstimate::Resolved { v_emp, v_bound, crossings, .. } => {
            ensure(v_emp <= v_bound, || format!("v_emp {v_emp} > v_bound {v_bound}"))?;
            Ok(format!(
                "{} records below bound; t=1 decay {:.2e} -> {:.2e}; v_emp {v_emp:.3} <= v_bound {v_bound:.3} ({} crossings)",
                sweep.len(),
                at_one[0],
                at_one[8],
                crossings.len()
            ))
        }
        other => Err(format!("front not resolved: {other:?}")),
    }
}

fn dynamics_convergence() -> Outcome {
    let windows: Vec<Region> = (1..=5).map(|r| Region::interval(-r, r + 1)).collect();
    let deltas = e(volume_convergence(&xxz(), &z_at(0), 0.5, &windows))?;
    let shown = deltas.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ");
    ensure(deltas.windows(2).all(|w| w[1] < w[0]), || format!("not strictly decreasing: {shown}"))?;
    // the radius-5 entry is the proxy itself, so the last informative delta is radius 4
    let last = deltas[deltas.len() - 2];
    ensure(last < 1e-6, || format!("radius-4 delta {last:.3e} >= 1e-6 (deltas {shown})"))?;
    Ok(format!("deltas {shown}"))
}

fn taylor_soundness() -> Outcome {
    use rand::Rng;
    let window = Region::chain(6);
    let phi = e(xxz().restricted(&window))?;
    let mut rng = sampling::rng(10);
    let mut worst_slack = f64::INFINITY;
    let mut cases = 0;
    while cases < 100 {
        let hermitian = rng.random_bool(0.5);
        let a = random_local(&mut rng, 6, hermitian);
        let t = rng.random_range(-0.06..0.06);
        let order = rng.random_range(0..=6);
        let Ok(r) = taylor_evolve(&phi, &a, t, order, 1.0) else {
            continue;
        };
        let exact = e(heisenberg_evolve(&phi, &window, &a, t))?;
        let err = e(e(r.operator.embed(&window))?.distance(&exact))?;
        ensure(err <= r.error_bound + 1e-10, || {
            format!("t={t} order={order}: error {err:e} > bound {:e}", r.error_bound)
        })?;
        worst_slack = worst_slack.min(r.error_bound + 1e-10 - err);
        cases += 1;
    }
    Ok(format!("100 admissible cases, min slack {worst_slack:.3e}"))
}

fn weight_le4_strings(n: usize) -> Vec<PauliString> {
    let mut out = vec![PauliString::identity(n)];
    let mut frontier = vec![(PauliString::identity(n), 0usize)];
    for _ in 0..4 {
        let mut next = Vec::new();
        for (p, start) in &frontier {
            for k in *start..n {
                for axis in Axis::ALL {
                    let q = p.mul(&PauliString::single(n, k, axis));
                    out.push(q.clone());
                    next.push((q, k + 1));
                }
            }
        }
        frontier = next;
    }
    out
}

fn toric() -> Outcome {
    let l2 = e(ToricLattice::new(2))?;
    let (rank, mult) = e(l2.dense_ground_space_dimension())?;
    ensure((rank, mult) == (4, 4), || format!("L=2 projector rank {rank}, eigensolve multiplicity {mult}"))?;
    let l3 = e(ToricLattice::new(3))?;
    let d3 = l3.ground_space_dimension();
    ensure(d3 == 4, || format!("L=3 GF(2) count {d3}"))?;
    let projector = e(l2.ground_projector())?;
    let omega = scale(projector.matrix(), c64::new(1.0 / trace(projector.matrix()).re, 0.0));
    let strings = weight_le4_strings(l2.num_edges());
    let mut worst = 0.0f64;
    for p in &strings {
        let op = e(l2.to_operator(p).embed(l2.edges()))?;
        let dense = trace_product(&omega, op.matrix());
        worst = worst.max((dense - l2.ground_expectation_pauli(p)).norm());
    }
    ensure(worst <= 1e-12, || format!("dense oracle mismatch {worst:e}"))?;
    let mut pairs = 0;
    for (lat, l) in [(&l2, 2i64), (&l3, 3)] {
        for sx in 0..l {
            for sy in 0..l {
                let a = e(lat.star_operator(sx, sy))?;
                for px in 0..l {
                    for py in 0..l {
                        let b = e(lat.plaquette_operator(px, py))?;
                        let c = e(commutator(&a, &b))?;
                        ensure(max_abs(c.matrix()) == 0.0, || format!("[A_({sx},{sy}), B_({px},{py})] != 0"))?;
                        pairs += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "L=2 (rank {rank}, multiplicity {mult}); L=3 {d3}; {} strings match; {pairs} star-plaquette pairs commute",
        strings.len()
    ))
}

fn polarization_check() -> Outcome {
    for l in [3, 5, 7] {
        let got = e(polarization_gap(l))?;
        ensure(got == (1.0, -1.0), || format!("L={l}: {got:?}"))?;
    }
    let flip = e(DensityState::basis(Region::interval(-1, 2), &[0, 1, 0], 2))?;
    let m = e(polarization(&flip))?;
    ensure((m - 1.0 / 3.0).abs() <= 1e-15, || format!("single flip gave {m}"))?;
    Ok(format!("(+1, -1) for L = 3, 5, 7; single flip {m}"))
}

fn clustering() -> Outcome {
    let window = Region::chain(10);
    let phi = ising(1.0, 0.25);
    let pairs: Vec<_> = (1..10).map(|j| (z_at(0), z_at(j))).collect();
    let result = e(clustering_sweep(&phi, &window, &pairs))?;
    ensure(result.gap > 0.5, || format!("gap {}", result.gap))?;
    let mu = result.mu_fit.ok_or("no fit")?;
    ensure(mu > 0.0, || format!("mu_fit {mu}"))?;
    let tail: Vec<f64> = result.points.iter().filter(|p| p.0 >= 2).map(|p| p.1).collect();
    ensure(tail.windows(2).all(|w| w[1] < w[0]), || format!("not monotone: {tail:?}"))?;
    Ok(format!("gap {:.4}; mu_fit {mu:.4}; correlations {:.2e} -> {:.2e}", result.gap, tail[0], tail[tail.len() - 1]))
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: 1, name: "Pauli commutation relations", limit: secs(1), run: pauli_algebra },
        Criterion { id: 2, name: "GNS dimensions and reconstruction", limit: secs(5), run: gns_examples },
        Criterion { id: 3, name: "purity iff irreducibility", limit: secs(10), run: purity_irreducibility },
        Criterion { id: 4, name: "KMS condition for Gibbs states", limit: secs(120), run: kms },
        Criterion { id: 5, name: "free-energy identity", limit: secs(30), run: free_energy_identity },
        Criterion { id: 6, name: "ground-state criterion", limit: secs(60), run: ground_state_criterion },
        Criterion { id: 7, name: "passivity of Gibbs states", limit: secs(60), run: passivity },
        Criterion { id: 8, name: "Lieb-Robinson sweep", limit: secs(300), run: lieb_robinson },
        Criterion { id: 9, name: "finite-volume convergence", limit: secs(120), run: dynamics_convergence },
        Criterion { id: 10, name: "Taylor error bound", limit: secs(120), run: taylor_soundness },
        Criterion { id: 11, name: "toric code", limit: secs(180), run: toric },
        Criterion { id: 12, name: "polarization", limit: secs(1), run: polarization_check },
        Criterion { id: 13, name: "exponential clustering", limit: secs(120), run: clustering },
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!("{detail}; runtime {elapsed:.2?} exceeds {:?}", c.limit)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {}: {detail} ({elapsed:.2?})", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {}: {detail} ({elapsed:.2?})", c.id, c.name);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
