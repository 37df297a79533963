"""Command-line front end: kgswaves {wave,spectrum,stability,evolve,report}."""
import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import PERTURBATIONS, RunConfig
from .errors import ClaimFailure, DomainError, KGSError, NumericalError
from .evolve import fit_growth, make_perturbed, run, wave_state, x_norm
from .grid import PeriodicGrid, SampledField
from .hillspec import (assemble_scalar, eig_sym, ground_state_overlap, lame_reproduction,
                       orthogonality_check, similarity_check, verify_counts)
from .stability import (d_second_closed, d_second_fixed_mass, d_second_numeric, d_second_sweep,
                        instability_index, linearized_spectrum, upsilon_report)
from .waves import beta_consistency, first_integral_spread, local_residual, make_wave, wave_derivative

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3
EXIT_CLAIM = 4

CHARGE_DRIFT_TOL = 1e-10
ENERGY_DRIFT_TOL = 1e-6

PLOT_SCRIPT = """\
import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else 'series.csv'
data = np.genfromtxt(path, delimiter=',', names=True)
fig, ax = plt.subplots()
ax.semilogy(data['t'], data['dist'])
ax.set_xlabel('t')
ax.set_ylabel('orbital distance')
fig.tight_layout()
fig.savefig(path.rsplit('.', 1)[0] + '_distance.png', dpi=150)
"""


def _plain(obj):
    """JSON-ready copy of nested numpy values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path: Path, obj: Dict[str, Any]):
    with open(path, 'w') as f:
        json.dump(_plain(obj), f, indent=2, sort_keys=True)
        f.write('\n')


def write_csv(path: Path, columns: Dict[str, Sequence[float]]):
    data = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
    np.savetxt(path, data, delimiter=',', header=','.join(columns), comments='', fmt='%.17g')


def _verdict(claim: str, passed: bool, detail: str = '') -> Dict[str, Any]:
    if not passed:
        logger.warning('claim failed: %s %s', claim, detail)
    return {'claim': claim, 'passed': bool(passed), 'detail': detail}


def _wave(cfg: RunConfig, multiple: Optional[int] = None):
    """The configured wave on [0, multiple * L] with the configured spacing."""
    multiple = cfg.domain_multiple if multiple is None else multiple
    g = PeriodicGrid(multiple * cfg.L, multiple * cfg.n)
    return make_wave(cfg.family, cfg.c, cfg.L, g)


def cmd_wave(cfg: RunConfig) -> Dict[str, Any]:
    print(f'🌊 Building {cfg.family} wave (c={cfg.c!r}, L={cfg.L!r}, n={cfg.n})...')
    w = _wave(cfg)
    residual = local_residual(w)
    write_csv(cfg.output_path / 'wave.csv', {
        'x': w.grid.points, 'phi': w.phi.values,
        'phi_prime': wave_derivative(w).values, 'residual_local': residual})
    p = w.params
    report = {
        'family': w.family, 'system': w.system, 'c': w.c, 'L': p.L, 'n': w.grid.n,
        'k': p.k.k, 'kprime_sq': p.k.kprime_sq, 'B': p.B,
        'ode_residual': float(np.max(np.abs(residual))),
        'first_integral_spread': first_integral_spread(w),
        'invariant_defects': p.invariant_defects(),
    }
    if w.family == 'cnoidal':
        report.update(omega=p.omega, beta1=p.beta1, beta2=p.beta2, beta3=p.beta3,
                      beta_consistency=beta_consistency(p))
    else:
        report.update(eta=p.eta)
    write_json(cfg.output_path / 'wave.json', report)
    print(f'✅ ODE residual {report["ode_residual"]:.3e}, files in {cfg.output_dir}')
    return report


def _free_spectrum(cfg: RunConfig) -> Dict[str, Any]:
    g = PeriodicGrid(cfg.domain_multiple * cfg.L, cfg.n * cfg.domain_multiple)
    op = assemble_scalar(SampledField(g, np.zeros(g.n)), cfg.c, g, 'free')
    spec = eig_sym(op, cfg.zero_tol)
    symbols = np.sort(2 * cfg.c + g.wavenumbers ** 2)
    err = float(np.max(np.abs(spec.eigenvalues - symbols)) / symbols[-1])
    return {
        'operators': {'free': {'eigenvalues': spec.eigenvalues, 'n_negative': spec.n_negative,
                               'kernel_dim': spec.kernel_dim}},
        'claims': [_verdict('free operator: eigenvalues are 2c + xi^2', err <= 1e-10,
                            f'relative error {err:.3e}')],
    }


def cmd_spectrum(cfg: RunConfig) -> Dict[str, Any]:
    print(f'🔍 Checking linearized spectra ({cfg.family}, domain x{cfg.domain_multiple})...')
    if cfg.free:
        report = _free_spectrum(cfg)
    else:
        w = _wave(cfg)
        counts = verify_counts(w, zero_tol=cfg.zero_tol)
        claims = [_verdict(v.claim, v.passed, v.detail) for v in counts.verdicts]
        degree = 3 if cfg.family == 'cnoidal' else 2
        lame = lame_reproduction(w.params.k, degree, cfg.n)
        claims.append(_verdict('Lame periodic band edges reproduced',
                               lame['periodic_error'] <= 1e-6, f'{lame["periodic_error"]:.3e}'))
        claims.append(_verdict('Lame semiperiodic band edges reproduced',
                               lame['semiperiodic_error'] <= 1e-6,
                               f'{lame["semiperiodic_error"]:.3e}'))
        sim = similarity_check(w)
        claims.append(_verdict('LR block-diagonalizes into (L1, L3)', sim <= 1e-10, f'{sim:.3e}'))
        report = {
            'operators': {name: {'eigenvalues': s.eigenvalues, 'n_negative': s.n_negative,
                                 'kernel_dim': s.kernel_dim, 'zero_tol': s.zero_tol}
                          for name, s in counts.spectra.items()},
            'lame': lame, 'similarity_defect': sim, 'claims': claims,
        }
        if cfg.domain_multiple == 2:
            L1 = counts.spectra['L1' + ('cn' if cfg.family == 'cnoidal' else 'dn')]
            orth = orthogonality_check(L1, w)
            ground = ground_state_overlap(L1, w)
            norm_phi = math.sqrt(float(np.sum(w.phi.values ** 2) * w.grid.spacing))
            claims.append(_verdict('second and third eigenfunctions of L1 are orthogonal to phi',
                                   orth <= 1e-8 * norm_phi, f'{orth:.3e}'))
            claims.append(_verdict('ground state of L1 overlaps phi positively', ground > 0,
                                   f'{ground:.6g}'))
    write_json(cfg.output_path / 'spectrum.json', report)
    return report


def cmd_stability(cfg: RunConfig) -> Dict[str, Any]:
    print(f'📈 Stability analysis of the {cfg.family} wave at c={cfg.c!r}...')
    numeric = d_second_numeric(cfg.c, cfg.L, cfg.family, n=cfg.n)
    closed = d_second_closed(cfg.family, cfg.c, cfg.L)
    fixed = d_second_fixed_mass(_wave(cfg, 1), zero_tol=cfg.zero_tol)
    gap = abs(numeric - closed) / abs(closed)
    claims = [_verdict('d\'\'(c) > 0', numeric > 0, f'{numeric:.12g}'),
              _verdict('closed-form d\'\'(c) agrees with differentiation', gap <= 1e-6,
                       f'{gap:.3e}')]
    report: Dict[str, Any] = {'d_second': {'numeric': numeric, 'closed': closed,
                                           'relative_gap': gap, 'fixed_mass': fixed}}

    for multiple in (1, 2):
        w = _wave(cfg, multiple)
        index = instability_index(w, zero_tol=cfg.zero_tol)
        spectrum = linearized_spectrum(w, full=False)
        key, domain = ('single', '[0,L]') if multiple == 1 else ('doubled', '[0,2L]')
        report[key] = {
            'n_LR': index.n_LR, 'n_LR_hat': index.n_LR_hat, 'n_LI_inv_hat': index.n_LI_inv_hat,
            'cone_dim': index.cone_dim, 'index': index.index,
            'sigma_max': spectrum.sigma_max, 'growth_rates': spectrum.growth_rates,
            'growth_tolerance': spectrum.tolerance,
        }
        claims.append(_verdict(f'real growth rates on {domain} match the index',
                               spectrum.n_unstable == index.index,
                               f'{spectrum.n_unstable} rate(s), index {index.index}'))
        if multiple == 1:
            claims.append(_verdict('fixed-mass convexity decides growth on [0,L]',
                                   (fixed > 0) != spectrum.unstable,
                                   f'fixed-mass d\'\' {fixed:.6g}, sigma_max {spectrum.sigma_max:.3e}'))
            if cfg.family == 'cnoidal':
                claims.append(_verdict('no unstable mode on [0,L]', not spectrum.unstable,
                                       f'sigma_max {spectrum.sigma_max:.3e}'))
        else:
            expected_ok = index.index == 2 if cfg.family == 'cnoidal' else index.index > 0
            claims.append(_verdict('instability index on [0,2L]', expected_ok,
                                   f'index {index.index}'))
            claims.append(_verdict('J L has a real unstable pair on [0,2L]', spectrum.unstable,
                                   f'sigma_max {spectrum.sigma_max:.8g}'))

    if cfg.family == 'cnoidal':
        report['mass_integral'] = upsilon_report(_wave(cfg, 1).params.k, cfg.L, cfg.n)
        claims.append(_verdict('int phi_omega^2 = 2 omega int phi_omega',
                               report['mass_integral']['identity_defect'] <= 1e-8,
                               f'{report["mass_integral"]["identity_defect"]:.3e}'))
    if cfg.sweep:
        fam_threshold = (2 if cfg.family == 'cnoidal' else 1) * math.pi ** 2 / cfg.L ** 2
        cs = np.linspace(1.1, 10.0, cfg.sweep) * fam_threshold
        rows = d_second_sweep(cfg.family, cfg.L, cs)
        report['sweep'] = rows
        claims.append(_verdict('d\'\'(c) > 0 across the sweep',
                               all(r['numeric'] > 0 for r in rows), f'{len(rows)} points'))
    report['claims'] = claims
    write_json(cfg.output_path / 'stability.json', report)
    return report


def cmd_evolve(cfg: RunConfig) -> Dict[str, Any]:
    print(f'⏱️  Evolving perturbed {cfg.family} wave to T={cfg.T!r} (dt={cfg.dt!r})...')
    w = _wave(cfg)
    if cfg.perturbation == 'unstable_mode':
        spectrum = linearized_spectrum(w, full=False)
        if spectrum.unstable_mode is None:
            raise DomainError(f'the {cfg.family} wave has no unstable mode on this domain')
        direction, mode = spectrum.unstable_mode, 'phase_only'
    else:
        spectrum, direction, mode = None, 'random_smooth', 'phase_translation'
    initial = make_perturbed(w, direction, cfg.epsilon, cfg.seed)
    diag = run(initial, cfg.T, cfg.dt, cfg.system, cfg.c, cfg.observe_every, w, mode)

    out = cfg.output_path
    write_csv(out / 'series.csv', {'t': diag.times, 'E': diag.E_series, 'F': diag.F_series,
                                   'dist': diag.dist_series})
    (out / 'plot_distance.py').write_text(PLOT_SCRIPT)
    report = {
        'params': diag.params, 'E_drift': diag.drift('E'), 'F_drift': diag.drift('F'),
        'max_distance': max(diag.dist_series), 'distance_mode': mode,
        'claims': [_verdict('charge conserved', diag.drift('F') <= CHARGE_DRIFT_TOL,
                            f'{diag.drift("F"):.3e}'),
                   _verdict('energy conserved', diag.drift('E') <= ENERGY_DRIFT_TOL,
                            f'{diag.drift("E"):.3e}')],
    }
    if mode == 'phase_translation':
        bound = 10 * cfg.epsilon
        report['claims'].append(_verdict('orbital distance stays below 10 epsilon',
                                         report['max_distance'] <= bound,
                                         f'{report["max_distance"]:.3e}'))
    if cfg.fit:
        fit = fit_growth(diag, cfg.epsilon, x_norm(wave_state(w)))
        growth = {'sigma_fit': fit.sigma_fit, 'window': fit.window, 'residual': fit.residual}
        if spectrum is not None:
            growth['sigma_max'] = spectrum.sigma_max
            rel = abs(fit.sigma_fit - spectrum.sigma_max) / spectrum.sigma_max
            report['claims'].append(_verdict('fitted growth matches sigma_max within 10%',
                                             rel <= 0.1, f'{rel:.3e}'))
        write_json(out / 'growth.json', growth)
        report['growth'] = growth
    write_json(out / 'evolve.json', report)
    print(f'✅ E drift {report["E_drift"]:.2e}, F drift {report["F_drift"]:.2e}, '
          f'max distance {report["max_distance"]:.3e}')
    return report


REPORT_INPUTS = ('wave.json', 'spectrum.json', 'stability.json', 'evolve.json', 'growth.json')


def cmd_report(cfg: RunConfig) -> Dict[str, Any]:
    out = cfg.output_path
    present = [name for name in REPORT_INPUTS if (out / name).is_file()]
    if not present:
        raise DomainError(f'no reports to aggregate in {out}')
    inputs, verdicts, wall_times = {}, [], {}
    for name in present:
        with open(out / name) as f:
            data = json.load(f)
        wall_times[name] = data.pop('wall_time', None)
        inputs[name] = data
        verdicts.extend(dict(v, source=name) for v in data.get('claims', []))
    manifest = {'config': cfg.to_dict(), 'inputs': inputs, 'verdicts': verdicts,
                'wall_times': wall_times, 'passed': all(v['passed'] for v in verdicts)}
    write_json(out / 'manifest.json', manifest)
    print(f'📁 Aggregated {len(present)} report(s) into {out / "manifest.json"}')
    return manifest


COMMANDS = {
    'wave': cmd_wave,
    'spectrum': cmd_spectrum,
    'stability': cmd_stability,
    'evolve': cmd_evolve,
    'report': cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON file with RunConfig fields')
    common.add_argument('-v', '--verbose', action='store_true')
    common.add_argument('--system', choices=['yukawa', 'cubic'])
    common.add_argument('--family', choices=['cnoidal', 'dnoidal'])
    common.add_argument('--c', type=float)
    common.add_argument('--L', type=float)
    common.add_argument('--n', type=int)
    common.add_argument('--double-domain', dest='domain_multiple', action='store_const', const=2)
    common.add_argument('--dt', type=float)
    common.add_argument('--T', type=float)
    common.add_argument('--eps', dest='epsilon', type=float)
    common.add_argument('--seed', type=int)
    common.add_argument('--zero-tol', dest='zero_tol', type=float)
    common.add_argument('--out', dest='output_dir')

    parser = argparse.ArgumentParser(
        prog='kgswaves', description='Periodic standing waves of Klein-Gordon-Schrodinger systems')
    sub = parser.add_subparsers(dest='command', required=True)
    sub.add_parser('wave', parents=[common], help='build a wave and its residuals')
    spectrum = sub.add_parser('spectrum', parents=[common], help='linearized operator spectra')
    spectrum.add_argument('--free', action='store_const', const=True)
    stability = sub.add_parser('stability', parents=[common], help="d''(c), index and J L")
    stability.add_argument('--sweep', type=int)
    evolve = sub.add_parser('evolve', parents=[common], help='perturbed time evolution')
    evolve.add_argument('--fit', action='store_const', const=True)
    evolve.add_argument('--perturbation', choices=PERTURBATIONS)
    evolve.add_argument('--observe-every', dest='observe_every', type=int)
    sub.add_parser('report', parents=[common], help='aggregate reports into manifest.json')
    return parser


def config_from(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    flags = {k: v for k, v in vars(args).items() if k not in ('config', 'verbose', 'command')}
    return cfg.merged(flags).resolved()


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(levelname)s %(name)s: %(message)s')
    try:
        cfg = config_from(args)
        cfg.output_path.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        report = COMMANDS[args.command](cfg)
        if args.command != 'report':
            path = cfg.output_path / f'{args.command}.json'
            if path.is_file():
                with open(path) as f:
                    data = json.load(f)
                data['wall_time'] = time.perf_counter() - start
                write_json(path, data)
        failed = [v for v in report.get('claims', report.get('verdicts', [])) if not v['passed']]
        if failed:
            raise ClaimFailure('; '.join(v['claim'] for v in failed))
    except DomainError as e:
        print(f'❌ {e}', file=sys.stderr)
        return EXIT_DOMAIN
    except NumericalError as e:
        print(f'❌ numerical failure: {e}', file=sys.stderr)
        return EXIT_NUMERICAL
    except ClaimFailure as e:
        print(f'⚠️  claim(s) failed: {e}', file=sys.stderr)
        return EXIT_CLAIM
    except KGSError as e:
        print(f'❌ {e}', file=sys.stderr)
        return EXIT_NUMERICAL
    print('🎉 Done')
    return EXIT_OK
