#!/usr/bin/env python3
"""
k-space reconstruction lab - command-line entry point

    python run.py phantom --count 8 --out data/phantoms
    python run.py undersample data/phantoms/*.ksr --accel 4 --acs 16 --out data/train.ksr
    python run.py train --data data/train.ksr --out runs/rd
    python run.py eval --data data/test.ksr --model rd-unet "runs/rd/checkpoint_final.ksr" --out runs/eval

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

import dataclasses
import logging
import os

import click
import numpy as np

from kspace_lab import create_lab
from kspace_lab.io.checkpoint import load_checkpoint, save_history
from kspace_lab.io.config_file import load_run_config, save_run_config
from kspace_lab.io.container import load_container, save_container
from kspace_lab.io.datasets import (
    Acquisition, kspace_volume, load_acquisition, load_images, save_acquisition, save_phantom
)
from kspace_lab.io.png import difference_to_uint8, to_uint8, write_png
from kspace_lab.metrics import (
    EvalCase, GrappaMethod, NetworkMethod, ZeroFillMethod, evaluate_methods, mse
)
from kspace_lab.models import RunConfig
from kspace_lab.nn.rdunet import RDUNet
from kspace_lab.simulate import (
    apply_mask, build_mask, make_sensitivities, random_phantom, shepp_logan, undersample,
    zero_filled_recon
)
from kspace_lab.train import make_pairs, normalize, sweep_alpha, train_loop
from kspace_lab.utils.error_handlers import main_exit
from kspace_lab.utils.validators import IoError, MissingModel, ShapeMismatch

logger = logging.getLogger('kspace_lab.cli')


def ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as error:
        raise IoError(f"Cannot create directory {path}: {error}") from None


def write_text(path: str, text: str) -> None:
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(text)
    except OSError as error:
        raise IoError(f"Cannot write {path}: {error}") from None
    logger.info(f"Wrote {path}")


def resolve_run_config(settings, config_path, **overrides) -> RunConfig:
    """Profile defaults, then the config file, then command-line overrides."""
    run_cfg = load_run_config(config_path, settings) if config_path else RunConfig.from_settings(settings)
    train_changes = {key: value for key, value in overrides.items() if value is not None}
    if train_changes:
        run_cfg = dataclasses.replace(run_cfg, train=run_cfg.train.with_changes(**train_changes))
    return run_cfg


def masked_acquisition(acq: Acquisition, accel: int, n_acs: int) -> Acquisition:
    """Apply a mask to a fully sampled external volume; masked acquisitions pass through."""
    if acq.mask is not None:
        return acq
    mask = build_mask(acq.kspace.shape[2], accel, n_acs)
    masked = apply_mask(acq.kspace, mask)
    return Acquisition(kspace=masked, mask=mask, zero_filled=zero_filled_recon(masked),
                       truth=zero_filled_recon(acq.kspace))


def eval_cases(acq: Acquisition):
    return [
        EvalCase(masked_kspace=acq.kspace[s], mask=acq.mask,
                 truth=None if acq.truth is None else normalize(acq.truth[s]))
        for s in range(acq.n_slices)
    ]


def training_pairs(path: str, augment: bool):
    acq = load_acquisition(path)
    if acq.zero_filled is None or acq.truth is None:
        raise IoError(f"{path} lacks zero-filled and ground-truth images; run 'undersample' first")
    return make_pairs(acq.zero_filled, acq.truth, augment)


@click.group()
@click.option('--profile', default=None,
              help="Configuration profile (desk, paper, testing); defaults to $KSPACE_LAB_PROFILE.")
@click.pass_context
def cli(ctx, profile):
    """k-space reconstruction lab."""
    ctx.obj = create_lab(profile)


@cli.command('phantom')
@click.option('--size', type=click.IntRange(min=1), default=None, help="Image side length.")
@click.option('--count', type=click.IntRange(min=0), default=1, show_default=True)
@click.option('--seed', type=int, default=None)
@click.option('--canonical', is_flag=True, help="Make slice 0 the canonical Shepp-Logan phantom.")
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.pass_obj
def cmd_phantom(settings, size, count, seed, canonical, out):
    """Write ground-truth phantom images."""
    size = size or settings.IMAGE_SIZE
    seed = settings.SEED if seed is None else seed
    rng = np.random.default_rng(seed)

    for index in range(count):
        if canonical and index == 0:
            img = shepp_logan(size, size)
        else:
            img = random_phantom(size, size, rng)
        path = os.path.join(out, f"phantom_{index:03d}.ksr")
        click.echo(f"{save_phantom(path, img)}  {path}")


@cli.command('undersample')
@click.argument('inputs', nargs=-1, required=True, type=click.Path())
@click.option('--accel', type=click.IntRange(min=1), default=None)
@click.option('--acs', type=click.IntRange(min=0), default=None)
@click.option('--coils', type=click.IntRange(min=1), default=None)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def cmd_undersample(settings, inputs, accel, acs, coils, out):
    """Simulate coil k-space from phantoms (or take an external volume) and undersample it."""
    accel = accel or settings.ACCELERATION
    acs = settings.NUM_ACS if acs is None else acs
    coils = coils or settings.NUM_COILS

    entries = load_container(inputs[0])
    if 'kspace' in entries:
        if len(inputs) > 1:
            raise click.UsageError("An external k-space volume must be the only input")
        if 'mask' in entries:
            raise click.UsageError(f"{inputs[0]} is already undersampled")
        volume = kspace_volume(entries, inputs[0])
        acq = masked_acquisition(Acquisition(volume, None, None, None), accel, acs)
    else:
        images = load_images(inputs)
        ny, nx = images[0].shape
        if any(img.shape != (ny, nx) for img in images):
            raise ShapeMismatch("All phantoms must share one size")
        mask = build_mask(ny, accel, acs)
        sens = make_sensitivities(coils, ny, nx)
        simulated = [undersample(img, sens, mask) for img in images]
        acq = Acquisition(
            kspace=np.stack([masked for masked, _, _ in simulated]),
            mask=mask,
            zero_filled=np.stack([zf for _, zf, _ in simulated]),
            truth=np.stack([full for _, _, full in simulated]),
        )

    logger.info(f"Undersampled {acq.n_slices} slices: R={accel}, ACS={acs}, "
                f"kept {acq.mask.kept_count}/{acq.mask.n_pe} lines")
    click.echo(f"{save_acquisition(out, acq)}  {out}")


@cli.command('recon')
@click.argument('input_path', type=click.Path())
@click.option('--method', required=True, type=click.Choice(['zf', 'grappa', 'net']))
@click.option('--checkpoint', default=None, type=click.Path(dir_okay=False))
@click.option('--accel', type=click.IntRange(min=1), default=None, help="Mask for external volumes.")
@click.option('--acs', type=click.IntRange(min=0), default=None, help="ACS lines for external volumes.")
@click.option('--out', required=True, type=click.Path(dir_okay=False))
@click.pass_obj
def cmd_recon(settings, input_path, method, checkpoint, accel, acs, out):
    """Reconstruct every slice of an acquisition; reports MSE when ground truth is present."""
    if method == 'net':
        if not checkpoint:
            raise MissingModel("Method 'net' needs --checkpoint")
        recon_method = NetworkMethod({0: load_checkpoint(checkpoint)})
    elif method == 'grappa':
        recon_method = GrappaMethod(settings.GRAPPA_SOURCE_LINES, settings.GRAPPA_KX)
    else:
        recon_method = ZeroFillMethod()

    acq = masked_acquisition(load_acquisition(input_path), accel or settings.ACCELERATION,
                             settings.NUM_ACS if acs is None else acs)
    cases = eval_cases(acq)
    recon = np.stack([recon_method.raw(case, 0) for case in cases])
    entries = {'recon': recon}

    if all(case.truth is not None for case in cases):
        scores = [mse(case.truth, recon_method.reconstruct(case, 0)) for case in cases]
        entries['mse'] = np.asarray(scores, dtype=np.float64)
        click.echo(f"mse = {float(np.mean(scores))!r}")

    click.echo(f"{save_container(out, entries)}  {out}")


@cli.command('train')
@click.option('--config', 'config_path', default=None, type=click.Path(dir_okay=False))
@click.option('--data', default=None, type=click.Path(dir_okay=False), help="Training acquisition.")
@click.option('--validation-data', default=None, type=click.Path(dir_okay=False))
@click.option('--epochs', type=click.IntRange(min=0), default=None)
@click.option('--seed', type=int, default=None)
@click.option('--alpha', type=click.FloatRange(min=0), default=None)
@click.option('--plain-unet', is_flag=True, help="Copy skips instead of residual dense blocks.")
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.pass_obj
def cmd_train(settings, config_path, data, validation_data, epochs, seed, alpha, plain_unet, out):
    """Train the network; writes checkpoints, the loss history and the resolved configuration."""
    run_cfg = resolve_run_config(settings, config_path, epochs=epochs, seed=seed, alpha=alpha)
    if plain_unet:
        run_cfg = dataclasses.replace(run_cfg, net=dataclasses.replace(run_cfg.net, dense_skips=False))

    data = data or run_cfg.paths.train_data
    if not data:
        raise click.UsageError("No training data: pass --data or set paths.train_data")
    validation_data = validation_data or run_cfg.paths.validation_data
    run_cfg = dataclasses.replace(run_cfg, paths=dataclasses.replace(
        run_cfg.paths, train_data=data, validation_data=validation_data or '', output_dir=out))

    cfg = run_cfg.train
    pairs = training_pairs(data, cfg.augment)
    validation = training_pairs(validation_data, False) if validation_data else None

    ensure_dir(out)
    net = RDUNet(run_cfg.net, seed=cfg.seed, dtype=cfg.dtype)
    logger.info(f"Training {net.parameter_count()} parameters on {len(pairs)} pairs for {cfg.epochs} epochs")
    result = train_loop(pairs, net, cfg, validation=validation, checkpoint_dir=out)

    save_history(os.path.join(out, 'loss_history.ksr'), result.history, result.iteration_losses)
    save_run_config(os.path.join(out, 'run_config.toml'), run_cfg)
    if result.history:
        click.echo(f"final loss = {result.history[-1].train.total!r}")


@cli.command('eval')
@click.option('--config', 'config_path', default=None, type=click.Path(dir_okay=False))
@click.option('--data', default=None, type=click.Path(dir_okay=False), help="Test acquisition.")
@click.option('--model', 'models', multiple=True, type=(str, str),
              help="LABEL CHECKPOINT; '{seed}' in the path is replaced by each seed.")
@click.option('--seed', 'seeds', multiple=True, type=int, help="Trial seeds (repeatable).")
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.pass_obj
def cmd_eval(settings, config_path, data, models, seeds, out):
    """Compare zero-fill, GRAPPA and trained networks by MSE across trials."""
    run_cfg = resolve_run_config(settings, config_path)
    data = data or run_cfg.paths.test_data
    if not data:
        raise click.UsageError("No test data: pass --data or set paths.test_data")
    seeds = list(seeds) or [run_cfg.train.seed]

    sampling = run_cfg.sampling
    acq = masked_acquisition(load_acquisition(data), sampling.accel, sampling.n_acs)
    methods = {
        'zero-fill': ZeroFillMethod(),
        'grappa': GrappaMethod(sampling.grappa_source_lines, sampling.grappa_kx),
    }
    for label, pattern in models:
        methods[label] = NetworkMethod({seed: pattern.replace('{seed}', str(seed)) for seed in seeds})

    report = evaluate_methods(eval_cases(acq), methods, seeds)

    ensure_dir(out)
    write_text(os.path.join(out, 'eval_report.txt'), report.to_text())
    write_text(os.path.join(out, 'eval_report.kv'), report.to_key_values())
    click.echo(report.to_text(), nl=False)


@cli.command('export-png')
@click.argument('input_path', type=click.Path())
@click.option('--entry', default=None, help="Container entry (default: recon, image or truth).")
@click.option('--slice', 'slice_index', type=click.IntRange(min=0), default=0, show_default=True)
@click.option('--diff-against', default=None, type=click.Path(dir_okay=False),
              help="Write reconstruction minus this file's image instead.")
@click.option('--diff-entry', default='truth', show_default=True)
@click.option('--normalize', 'normalize_both', is_flag=True,
              help="Normalise both images before taking the difference.")
@click.option('--out', required=True, type=click.Path(dir_okay=False))
def cmd_export_png(input_path, entry, slice_index, diff_against, diff_entry, normalize_both, out):
    """8-bit grayscale PNG of an image, or of a difference image with zero at mid-gray."""
    img = _pick_image(load_container(input_path), entry, slice_index, input_path)

    if diff_against:
        truth = _pick_image(load_container(diff_against), diff_entry, slice_index, diff_against)
        if normalize_both:
            img, truth = normalize(img), normalize(truth)
        pixels = difference_to_uint8(img, truth)
    else:
        pixels = to_uint8(img)

    click.echo(f"{write_png(out, pixels)}  {out}")


def _pick_image(entries, entry, slice_index, source):
    if entry is None:
        entry = next((name for name in ('recon', 'image', 'truth') if name in entries), None)
    if entry is None or entry not in entries:
        raise IoError(f"{source} has no entry {entry!r}")

    img = entries[entry]
    if img.ndim == 3:
        if slice_index >= img.shape[0]:
            raise IoError(f"{source}: slice {slice_index} out of range ({img.shape[0]} slices)")
        img = img[slice_index]
    if img.ndim != 2 or np.iscomplexobj(img):
        raise ShapeMismatch(f"{source}: '{entry}' is not a real image stack")
    return img


@cli.command('sweep-alpha')
@click.option('--config', 'config_path', default=None, type=click.Path(dir_okay=False))
@click.option('--data', default=None, type=click.Path(dir_okay=False))
@click.option('--validation-data', default=None, type=click.Path(dir_okay=False))
@click.option('--alpha', 'alphas', multiple=True, type=click.FloatRange(min=0),
              help="Alpha values to try (repeatable); defaults to the profile sweep plus 0.")
@click.option('--epochs', type=click.IntRange(min=0), default=None)
@click.option('--seed', type=int, default=None)
@click.option('--out', required=True, type=click.Path(file_okay=False))
@click.pass_obj
def cmd_sweep_alpha(settings, config_path, data, validation_data, alphas, epochs, seed, out):
    """Train once per alpha and rank by validation MSE."""
    run_cfg = resolve_run_config(settings, config_path, epochs=epochs, seed=seed)
    data = data or run_cfg.paths.train_data
    validation_data = validation_data or run_cfg.paths.validation_data
    if not data or not validation_data:
        raise click.UsageError("The sweep needs both training and validation data")
    alphas = list(alphas) or list(settings.ALPHA_SWEEP) + [0.0]

    trials = sweep_alpha(training_pairs(data, run_cfg.train.augment), training_pairs(validation_data, False),
                         run_cfg.net, run_cfg.train, alphas)

    lines = [f"{'rank':>4}  {'alpha':>8}  {'validation_mse':>14}"]
    lines += [f"{rank:>4}  {trial.alpha:>8g}  {trial.validation_mse:>14.6f}"
              for rank, trial in enumerate(trials, start=1)]
    text = '\n'.join(lines) + '\n'

    ensure_dir(out)
    write_text(os.path.join(out, 'alpha_sweep.txt'), text)
    click.echo(text, nl=False)


if __name__ == '__main__':
    main_exit(cli)
