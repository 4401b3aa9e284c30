"""
Command-line interface for the Y00 cipher lab
"""

import sys
import click

from y00lab.config import ScenarioConfig
from y00lab.engine import ScenarioEngine, fmt
from y00lab.errors import Y00LabError
from y00lab.prng import running_key_period
from y00lab.utils import create_summary_table, setup_logging, write_artifacts


def _load_engine(ctx) -> ScenarioEngine:
    """Load the scenario named on the group and apply command-line overrides"""
    config = ScenarioConfig(ctx.obj['config_path'])
    config.load()
    if ctx.obj['seed'] is not None:
        config.seed = ctx.obj['seed']
    if ctx.obj['out_dir']:
        config.output.directory = ctx.obj['out_dir']

    setup_logging(config.logging)
    return ScenarioEngine(config)


def _fail(e: Exception):
    if isinstance(e, FileNotFoundError):
        click.echo(f"Configuration error: {str(e)}", err=True)
        sys.exit(2)
    if isinstance(e, Y00LabError):
        click.echo(f"Error: {str(e)}", err=True)
        sys.exit(e.exit_code)
    click.echo(f"Error: {str(e)}", err=True)
    sys.exit(1)


@click.group()
@click.option('--config', 'config_path', default='./config/scenario.yaml', help='Scenario file path')
@click.option('--seed', type=click.IntRange(0, 2 ** 64 - 1), default=None, help='Run seed (overrides the scenario)')
@click.option('--out', 'out_dir', default=None, help='Artifact output directory')
@click.pass_context
def cli(ctx, config_path, seed, out_dir):
    """Y00 cipher lab - breach analytics, correlation attacks, detection theory and key refresh"""
    ctx.ensure_object(dict)
    ctx.obj['config_path'] = config_path
    ctx.obj['seed'] = seed
    ctx.obj['out_dir'] = out_dir


@cli.command()
@click.option('--horizon', type=click.IntRange(1), default=None, help='Number of slots')
@click.pass_context
def simulate(ctx, horizon):
    """Simulate a transmission and measure Bob's bit error rate"""
    try:
        engine = _load_engine(ctx)

        result = engine.simulate(horizon)
        artifacts = [("trace.csv", engine.simulation_csv(result))]
        paths = write_artifacts(engine.config.output.directory, artifacts)

        click.echo(f"Slots: {len(result.trace)} | Bob errors: {result.bob_errors} | "
                   f"BER: {fmt(result.bob_ber)} | T_LCM: {fmt(result.t_lcm)}")
        for path in paths:
            click.echo(f"✓ {path}")

    except Exception as e:
        _fail(e)


@cli.command('breach-curve')
@click.option('--pth', type=click.FloatRange(0, 1, min_open=True, max_open=True), default=None,
              help='Security threshold P_Th')
@click.option('--grid', default=None, help='N grid as START:STOP:STEP')
@click.option('--reference', is_flag=True, help='Use the three 256-bit reference parameter sets')
@click.pass_context
def breach_curve(ctx, pth, grid, reference):
    """Emit Eve's success upper bound versus the number of observed periods"""
    try:
        engine = _load_engine(ctx)

        reports = engine.analyze_breach(grid=grid, p_th=pth, reference=reference)
        artifacts = [("breach_curve.csv", engine.breach_csv(reports))]
        paths = write_artifacts(engine.config.output.directory, artifacts)

        headers = ["Curve", "1/N_Breach", "Class", "N at P_Th"]
        rows = [[label, fmt(r.inv_n_breach), r.classification.value, fmt(r.n_at_threshold)]
                for label, r in reports]
        click.echo(create_summary_table(headers, rows))
        for path in paths:
            click.echo(f"✓ {path}")

    except Exception as e:
        _fail(e)


@cli.command()
@click.option('--trials', type=click.IntRange(1), default=None, help='Number of attack trials')
@click.option('--horizon', type=click.IntRange(1), default=None, help='Slots observed per trial')
@click.pass_context
def fca(ctx, trials, horizon):
    """Run the fast correlation attack campaign"""
    try:
        engine = _load_engine(ctx)

        click.echo("Starting correlation attack campaign...")
        result = engine.run_fca(trials, horizon)
        artifacts = [("fca_trials.csv", engine.fca_csv(result))]
        paths = write_artifacts(engine.config.output.directory, artifacts)

        click.echo(f"\nRecovered: {result.successful}/{result.total_trials} | "
                   f"Refused: {result.refused} | Wrong seed: {result.failed}")
        for path in paths:
            click.echo(f"✓ {path}")

    except Exception as e:
        _fail(e)


@cli.command()
@click.pass_context
def qdetect(ctx):
    """Evaluate desk-scale quantum detection checks"""
    try:
        engine = _load_engine(ctx)

        rows = engine.run_qdetect()
        artifacts = [("qdetect.csv", engine.qdetect_csv(rows))]
        paths = write_artifacts(engine.config.output.directory, artifacts)

        table = [[q, fmt(float(v)), fmt(float(r)), "✓" if ok else "✗"] for q, v, r, ok in rows]
        click.echo(create_summary_table(["Quantity", "Value", "Reference", "OK"], table))
        for path in paths:
            click.echo(f"✓ {path}")

        sys.exit(0 if all(row[3] for row in rows) else 1)

    except Exception as e:
        _fail(e)


@cli.command()
@click.option('--hinf-mode', type=click.Choice(['exact', 'bound']), default=None,
              help='Min-entropy estimate for the raw key')
@click.option('--tau', default=None, help="Hash output length, or 'auto'")
@click.pass_context
def keyfresh(ctx, hinf_mode, tau):
    """Run leftover-hash key refresh rounds"""
    try:
        engine = _load_engine(ctx)

        runs = engine.run_keyfresh(hinf_mode, tau)
        artifacts = [("keyfresh_transcript.csv", engine.keyfresh_csv(runs))]
        paths = write_artifacts(engine.config.output.directory, artifacts)

        aborted = sum(1 for run in runs if run.status != "ok")
        click.echo(f"Refresh rounds: {len(runs)} | Aborted: {aborted}")
        for path in paths:
            click.echo(f"✓ {path}")

        sys.exit(4 if aborted else 0)

    except Exception as e:
        _fail(e)


@cli.command()
@click.pass_context
def report(ctx):
    """Write the one-page ITS classification summary"""
    try:
        engine = _load_engine(ctx)

        reports = engine.analyze_breach()
        t_lcm = running_key_period(engine.cfg, engine.config.breach.period_cap)
        text = engine.generate_report(reports[0][1], t_lcm)
        paths = write_artifacts(engine.config.output.directory, [("report.txt", text)])

        click.echo("\n" + text)
        for path in paths:
            click.echo(f"✓ {path}")

    except Exception as e:
        _fail(e)


def main():
    """Main entry point"""
    cli(obj={})


if __name__ == '__main__':
    main()
