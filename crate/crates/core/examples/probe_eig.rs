use coopfront::evolve::{estimate_speed, Species};
use coopfront::scenario::{critical_mu, scalar_as_system, InitialProfile, Numerics, Scenario};
use coopfront::*;
use std::time::Instant;

fn main() {
    let h = 0.05;
    let tent = KernelSpec::Tent { half_width: 1.0 };

    // criterion 11 probe: coupled run vs the four semi-wave bounds
    let t0 = Instant::now();
    let params = CoopParams {
        d1: 1.0,
        d2: 1.0,
        r1: 1.0,
        r2: 1.0,
        a: 1.0,
        b: 1.0,
        q: 1.0,
        mu1: 5.0,
        mu2: 8.0,
        s10: 2.0,
        s20: 2.0,
    };
    let k = sample_kernel(&tent, h, 1e-8).unwrap();
    let bounds = speed_bounds(&params, &k, &k, 60.0, 1e-10).unwrap();
    println!(
        "bounds: c1 [{:.4}, {:.4}], c2 [{:.4}, {:.4}] ({:.1}s)",
        bounds.c1_lo,
        bounds.c1_hi,
        bounds.c2_lo,
        bounds.c2_hi,
        t0.elapsed().as_secs_f64()
    );
    let t0 = Instant::now();
    let sc = Scenario {
        params,
        j1: tent,
        j2: tent,
        numerics: Numerics {
            h,
            dt: None,
            t_final: 200.0,
            l_halfline: 60.0,
            eps_tail: 1e-8,
            r_max: 400.0,
            sample_every: 0.5,
            max_extent: 1e4,
            tol: 1e-8,
        },
        init_u: InitialProfile::Plateau { amplitude: 0.5 },
        init_v: InitialProfile::Plateau { amplitude: 0.5 },
        test_mode: false,
    };
    let (out, _, _, _) = sc.run().unwrap();
    let e1 = estimate_speed(&out.history, Species::U, 0.5).unwrap();
    let e2 = estimate_speed(&out.history, Species::V, 0.5).unwrap();
    println!(
        "coupled speeds: s1' = {:.4} in [{:.4},{:.4}]? {} ; s2' = {:.4} in [{:.4},{:.4}]? {} ({:.1}s)",
        e1.speed,
        bounds.c1_lo * 0.95,
        bounds.c1_hi * 1.05,
        e1.speed >= bounds.c1_lo * 0.95 && e1.speed <= bounds.c1_hi * 1.05,
        e2.speed,
        bounds.c2_lo * 0.95,
        bounds.c2_hi * 1.05,
        e2.speed >= bounds.c2_lo * 0.95 && e2.speed <= bounds.c2_hi * 1.05,
        t0.elapsed().as_secs_f64()
    );

    // criterion 10 probe: critical expansion rate bisection
    let t0 = Instant::now();
    let lap = KernelSpec::Laplace { sigma: 1.0 };
    let sc = Scenario {
        params: scalar_as_system(1.5, 1.0, 1.0, 1.0, 0.5),
        j1: lap,
        j2: lap,
        numerics: Numerics {
            h,
            dt: None,
            t_final: 120.0,
            l_halfline: 60.0,
            eps_tail: 1e-8,
            r_max: 400.0,
            sample_every: 0.5,
            max_extent: 1e4,
            tol: 1e-8,
        },
        init_u: InitialProfile::Plateau { amplitude: 0.4 },
        init_v: InitialProfile::Plateau { amplitude: 0.0 },
        test_mode: true,
    };
    match critical_mu(&sc, Species::U, (0.05, 20.0), 0.02) {
        Ok(cm) => println!(
            "critical mu = {:.4}, bracket ({:.4}, {:.4}) ({:.1}s)",
            cm.mu_star,
            cm.bracket.0,
            cm.bracket.1,
            t0.elapsed().as_secs_f64()
        ),
        Err(e) => println!("critical mu FAILED: {e} ({:.1}s)", t0.elapsed().as_secs_f64()),
    }
}
