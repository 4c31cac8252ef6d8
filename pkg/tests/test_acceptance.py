"""End-to-end physics gates at production scale.

Each test exercises one headline behavior of the simulator, prints a
single PASS/FAIL line with the measured numbers, and asserts the same
condition.  Configurations follow the figure-scale runs, so this file
is slow: about ninety minutes on one core, dominated by the N_s = 20
pulse trains.  Seeds are fixed so every number here is reproducible.
"""
import math

import conftest
import numpy as np
from scipy import integrate

from echotrain import disorder, floquet, protocol
from echotrain.closedform import (INFINITE, lattice_constant,
                                  reduced_hahn_product)
from echotrain.engine import response_exact
from echotrain.model import (EPSILON_PER_PULSE, EPSILON_UNIFORM, IDEAL_PULSES,
                             VARIANT_FULL, VARIANT_REDUCED, PulseModel,
                             PulseSchedule, build_model)
from echotrain.protocol import _child_seed

EPS_FIXED = PulseModel(epsilon=0.07, epsilon_policy=EPSILON_UNIFORM)
EPS_PER_PULSE = PulseModel(epsilon=0.07, epsilon_policy=EPSILON_PER_PULSE)

LATE_WINDOW = slice(-24, None)


def gate(name: str, ok: bool, detail: str) -> None:
    conftest.record_gate(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def tail_stats(series) -> tuple[float, float]:
    m = series.mean[LATE_WINDOW]
    se = series.stderr[LATE_WINDOW]
    return float(m.mean()), float(np.sqrt((se ** 2).sum()) / se.size)


def lattice_constant_quadrature(d: float) -> float:
    """Independent route to the coupling-tail constant.

    Splits the defining integral (1/3) int_0^inf (1 - cos z)/z^(p+1) dz
    at z = 50 and evaluates the oscillatory tail with a weighted rule,
    using int_L^inf z^-(p+1) dz = 1/(p L^p) for the constant part.
    """
    p = d / 3.0
    head = integrate.quad(lambda z: (1.0 - math.cos(z)) / z ** (p + 1.0),
                          0.0, 50.0, limit=400)[0]
    tail_flat = 1.0 / (p * 50.0 ** p)
    tail_cos = integrate.quad(lambda z: z ** (-p - 1.0), 50.0, np.inf,
                              weight="cos", wvar=1.0)[0]
    return (head + tail_flat - tail_cos) / 3.0


def test_lattice_constant_dual_route():
    devs = [abs(lattice_constant(d) - lattice_constant_quadrature(d))
            for d in (1.0, 2.0, 4.0, 5.0)]
    dev3 = abs(lattice_constant(3.0) - math.pi / 6.0)
    ok = max(devs) <= 1e-8 and dev3 <= 1e-8
    gate("lattice constant dual route", ok,
         f"closed form vs quadrature maxdev={max(devs):.2e} (tol 1e-08), "
         f"|Lambda(3) - pi/6|={dev3:.2e}")


def test_engine_reduced_hahn_matches_product():
    worst = 0.0
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=12, density=0.72)
    for seed in (1, 2):
        real = disorder.realize(cfg, seed)
        model = build_model(real, VARIANT_REDUCED)
        sched = PulseSchedule(IDEAL_PULSES, 12, seed=0)
        norm = 12 * model.dim / 4.0
        for t in (0.4, 1.3):
            got = response_exact(model, sched, [0.5 * t], [t], "x")[0].real
            want = float(reduced_hahn_product(real.couplings, t))
            worst = max(worst, abs(got / norm - want))
    gate("reduced-model product oracle", worst <= 1e-10,
         f"N=12 one-pulse engine trace vs product, worst={worst:.2e} "
         f"(tol 1e-10)")


def test_hahn_d2_stretched_exponential():
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=18, target_t2=1.0)
    grid = np.geomspace(0.1, 2.0, 13)
    s = protocol.run_hahn(cfg, grid, 300, 5, variant=VARIANT_REDUCED)
    dev = np.abs(s.mean - np.exp(-s.times ** (2.0 / 3.0)))
    gate("Hahn decay d=2", dev.max() <= 0.05,
         f"N=18, 300 realizations vs exp(-t^(2/3)) on [0.1, 2]: "
         f"maxdev={dev.max():.4f} (tol 0.05)")


def test_hahn_uniform_coupling_gaussian():
    cfg = disorder.EnsembleConfig(d=INFINITE, n_spins=20, target_t2=1.0)
    # the grid starts at 0.2; the series brings its own exact t=0 point
    grid = np.linspace(0.0, 2.0, 11)[1:]
    s = protocol.run_hahn(cfg, grid, 20, 3, variant=VARIANT_REDUCED)
    dev = np.abs(s.mean - np.exp(-s.times ** 2))
    gate("Hahn decay uniform coupling", dev.max() <= 0.05,
         f"N=20 vs exp(-t^2) on [0, 2]: maxdev={dev.max():.4f} (tol 0.05)")


def test_ideal_train_tracks_hahn():
    # ideal pulses refocus the local fields exactly and leave the
    # couplings alone, so echo magnitudes cannot depend on how many
    # pulses fit into t; paired seeds make that a per-realization check
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=20, target_t2=1.0)
    c = protocol.run_cpmg(cfg, 0.07, 14, 40, 21, variant=VARIANT_REDUCED)
    # the hahn series prepends its own t=0 point, so both series line up
    h = protocol.run_hahn(cfg, c.times[1:], 40, 21, variant=VARIANT_REDUCED)
    rel = np.abs(c.mean[1:] - h.mean[1:]) / np.abs(h.mean[1:])
    gate("ideal train tracks single-pulse echo", rel.max() <= 0.02,
         f"N=20, tau=0.07, 14 pulses, paired seeds: "
         f"max relative deviation={rel.max():.1e} (tol 0.02)")


def test_long_lived_tail_and_per_pulse_errors():
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=20, target_t2=1.0)
    s_eps = protocol.run_cpmg(cfg, 0.07, 72, 100, 7, pulses=EPS_FIXED,
                              variant=VARIANT_REDUCED)
    i10 = int(np.argmin(np.abs(s_eps.times - 10.0)))
    floor = 5.0 * math.exp(-10.0 ** (2.0 / 3.0))
    tail_ok = s_eps.mean[i10] >= floor

    # the ideal train equals the per-realization Hahn curve here (a
    # global X flip commutes with every zz term), so paired ideal
    # echoes are the Hahn reference on the same grid
    s_ideal = protocol.run_cpmg(cfg, 0.07, 72, 100, 7,
                                variant=VARIANT_REDUCED)
    s_pp = protocol.run_cpmg(cfg, 0.07, 72, 100, 7, pulses=EPS_PER_PULSE,
                             variant=VARIANT_REDUCED)
    dev_pp = np.abs(s_pp.mean - s_ideal.mean).max()
    ok = tail_ok and dev_pp <= 0.05
    gate("long-lived coherence", ok,
         f"Mx(t=10)={s_eps.mean[i10]:.4f} >= {floor:.4f} with fixed "
         f"over-rotation; per-pulse random errors track Hahn: "
         f"maxdev={dev_pp:.4f} (tol 0.05)")


def test_subharmonic_contrast():
    # the matched ratio compares each odd echo against the log-midpoint
    # of its even neighbors, so a decaying envelope alone reads as 1 and
    # only a genuine period-doubled alternation moves it
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=20, target_t2=1.0)
    window = (2.0, 23.0)
    cap_e = protocol.MatrixCapture()
    s_eps = protocol.run_cpmg(cfg, 0.7, 16, 150, 7, pulses=EPS_FIXED,
                              variant=VARIANT_REDUCED, map_fn=cap_e)
    a_eps = protocol.matched_even_odd_ratio(s_eps, cap_e.rows, window)
    cap_i = protocol.MatrixCapture()
    s_id = protocol.run_cpmg(cfg, 0.7, 16, 150, 7, variant=VARIANT_REDUCED,
                             map_fn=cap_i)
    a_id = protocol.matched_even_odd_ratio(s_id, cap_i.rows, window)
    pull = abs(a_id.ratio - 1.0) / a_id.ratio_stderr
    ok = a_eps.ratio > 1.2 and pull <= 3.0
    gate("subharmonic even/odd contrast", ok,
         f"tau=0.7: matched ratio={a_eps.ratio:.3f} > 1.2 with pulse "
         f"errors; ideal ratio={a_id.ratio:.3f}+-{a_id.ratio_stderr:.3f} "
         f"({pull:.1f} se from 1)")


def test_longitudinal_channel():
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=12, target_t2=1.0)
    s_par = protocol.run_longitudinal(cfg, 0.07, 8, 3, 7,
                                      variant=VARIANT_FULL)
    par_err = np.abs(s_par.mean - (-1.0) ** np.arange(9)).max()

    # the per-pulse cosine envelope is a long-spacing law: it needs the
    # inter-pulse evolution to scramble what the pulse error leaks
    s_env = protocol.run_longitudinal(cfg, 0.7, 10, 50, 7,
                                      pulses=EPS_FIXED,
                                      variant=VARIANT_FULL)
    want = np.cos(math.pi * 0.07) ** np.arange(11)
    env_dev = np.abs(np.abs(s_env.mean) / want - 1.0).max()

    s_pl = protocol.run_longitudinal(cfg, 0.07, 400, 30, 7,
                                     pulses=EPS_FIXED,
                                     variant=VARIANT_FULL)
    drop = protocol.relative_tail_drop(s_pl)
    ok = par_err <= 1e-9 and env_dev <= 0.10 and drop <= 0.20
    gate("longitudinal channel", ok,
         f"ideal parity err={par_err:.1e} (tol 1e-09); envelope vs "
         f"cos^m(pi eps) dev={env_dev:.4f} (tol 0.10); late tail "
         f"drop={drop:.4f} (tol 0.20)")


def test_alternating_axis_and_y_nulls():
    # Same drive as the long-lived-coherence run: the locked tail needs a
    # fixed pulse axis, so alternating +x/-x (or watching the y channel)
    # leaves no long-time signal.  The check averages the final third of
    # the train; echoes within one realization are strongly correlated,
    # so the error comes from the spread of per-realization window means.
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=20, target_t2=1.0)
    window = (6.86, 10.09)
    cap_a = protocol.MatrixCapture()
    s_ap = protocol.run_apcp(cfg, 0.07, 72, 100, 7, pulses=EPS_FIXED,
                             variant=VARIANT_REDUCED, map_fn=cap_a)
    m_ap, se_ap = protocol.windowed_mean(s_ap, cap_a.rows, window)
    cap_y = protocol.MatrixCapture()
    s_y = protocol.run_cpmg(cfg, 0.07, 72, 100, 7, pulses=EPS_FIXED,
                            alpha="y", variant=VARIANT_REDUCED, map_fn=cap_y)
    m_y, se_y = protocol.windowed_mean(s_y, cap_y.rows, window)
    ok = abs(m_ap) <= 3.0 * se_ap and abs(m_y) <= 3.0 * se_y
    gate("alternating-axis and y-channel nulls", ok,
         f"final-third means: apcp={m_ap:.4f}+-{se_ap:.4f} "
         f"({abs(m_ap) / se_ap:.1f} se), y={m_y:.4f}+-{se_y:.4f} "
         f"({abs(m_y) / se_y:.1f} se), both <= 3 se")


def test_full_vs_reduced():
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=10, target_t2=1.0)
    s_f = protocol.run_cpmg(cfg, 0.07, 72, 30, 7, pulses=EPS_FIXED,
                            variant=VARIANT_FULL)
    s_r = protocol.run_cpmg(cfg, 0.07, 72, 30, 7, pulses=EPS_FIXED,
                            variant=VARIANT_REDUCED)
    comb = np.sqrt(s_f.stderr ** 2 + s_r.stderr ** 2)
    z = np.abs(s_f.mean - s_r.mean)[1:] / comb[1:]

    cfg_inf = disorder.EnsembleConfig(d=INFINITE, n_spins=12, target_t2=1.0)
    si_r = protocol.run_cpmg(cfg_inf, 0.07, 72, 20, 7, pulses=EPS_FIXED,
                             variant=VARIANT_REDUCED)
    si_f = protocol.run_cpmg(cfg_inf, 0.07, 72, 20, 7, pulses=EPS_FIXED,
                             variant=VARIANT_FULL)
    ratio = tail_stats(si_r)[0] / tail_stats(si_f)[0]
    ok = z.max() <= 3.0 and 1.3 <= ratio <= 3.0
    gate("full vs reduced model", ok,
         f"d=2 N=10 trains: max |full-reduced|={z.max():.2f} combined se; "
         f"uniform-coupling tail ratio reduced/full={ratio:.2f} "
         f"(gate [1.3, 3])")


def test_floquet_spectral_suite():
    cfg = disorder.EnsembleConfig(d=2.0, n_spins=10, target_t2=1.0)
    real = disorder.realize(cfg, _child_seed(7, 0, 0))
    model = build_model(real, VARIANT_FULL)
    sched = PulseSchedule(EPS_FIXED, 10, _child_seed(7, 0, 2))
    tau = 0.25
    u = floquet.build_floquet(model, sched, tau)
    unit_res = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    spec = floquet.diagonalize(u)

    sum_dev = 0.0
    want_sum = 10 * spec.dim / 4.0
    for alpha in ("x", "y", "z"):
        w = spec.element_matrix(alpha)
        sum_dev = max(sum_dev, abs(w.sum() - want_sum) / want_sum)

    m = np.arange(1, 51)
    recon = floquet.reconstruct_response(spec, "x", m)
    pulse_times = tau * (2 * np.arange(50) + 1)
    direct = response_exact(model, sched, pulse_times, 2 * tau * m, "x")
    norm = 10 * spec.dim / 4.0
    rec_dev = np.abs(recon - direct.real / norm).max()

    pairs = floquet.histogram_P(spec, 0.01).total()
    want_pairs = spec.dim * (spec.dim + 1) / 2.0
    sig = floquet.weighted_sigma(spec, "x", 0.01)
    integral = float(sig.values.sum() * 2.0 * sig.half_width)

    mass = {}
    for t in (0.07, 0.7):
        acc = 0.0
        for i in range(4):
            r_i = disorder.realize(cfg, _child_seed(11, i, 0))
            s_i = PulseSchedule(EPS_FIXED, 10, _child_seed(11, i, 2))
            sp_i = floquet.diagonalize(
                floquet.build_floquet(build_model(r_i, VARIANT_FULL), s_i, t))
            sg = floquet.weighted_sigma(sp_i, "x", 0.01)
            win = sg.bin_centers > math.pi - 0.25
            acc += float(sg.values[win].sum() * 2.0 * sg.half_width)
        mass[t] = acc / 4.0

    ok = (unit_res <= 1e-10 and sum_dev <= 1e-6 and rec_dev <= 1e-6
          and pairs == want_pairs and abs(integral - 1.0) <= 1e-9
          and mass[0.7] >= 0.05 and mass[0.07] <= 0.02
          and mass[0.7] >= 5.0 * mass[0.07])
    gate("one-period spectral suite", ok,
         f"N=10: unitarity={unit_res:.1e}, sum rule rel dev={sum_dev:.1e}, "
         f"reconstruction dev={rec_dev:.1e} (m<=50), pair count "
         f"{int(pairs)}={int(want_pairs)}, integral-1={integral - 1.0:.1e}, "
         f"pi-peak mass long/short tau={mass[0.7]:.3f}/{mass[0.07]:.3f}")
