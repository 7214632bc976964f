from . import estimator
from . import imputation
from . import indicators
from . import input_pipeline
from . import reporting
from . import simulate
from .error_model import ERROR_STRUCTURES
from .errors import DomainError, EstimationError

from dataclasses import dataclass
import logging
from time import time

from scipy import linalg

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PreparedData:
    inputs: input_pipeline.InputPipeline
    imputed: object
    migrants: object
    indicators: indicators.IndicatorPanel
    weights: indicators.SpatialWeights

    @property
    def grid(self):
        return self.inputs.grid

    @property
    def panel(self):
        return self.inputs.panel


def prepare(config):
    """loads, imputes, redistributes and computes indicators and weights"""
    config.check_inputs()
    inputs = input_pipeline.InputPipeline(years=config.years, **config.input_paths())

    logger.info('Imputing missing Hofstede scores ...')
    imputed = imputation.impute_hofstede(inputs.hofstede, inputs.registry, config.k_neighbors,
                                         config.imputation_weighting)
    logger.info('Redistributing unknown-origin migrants ...')
    migrants = imputation.redistribute_unknown(inputs.migrants)

    logger.info('Computing cultural indicators ...')
    panel_indicators = indicators.compute_cli(migrants, imputed, inputs.panel, inputs.grid)
    panel_indicators = indicators.compute_cdi(migrants, imputed, inputs.panel, panel_indicators, inputs.grid)
    logger.info('Building spatial weights ...')
    weights = indicators.build_weights(migrants, inputs.panel, inputs.grid)
    return PreparedData(inputs, imputed, migrants, panel_indicators, weights)


def cmd_indicators(config):
    start = time()
    data = prepare(config)
    reporting.write_indicator_exports(config.out, data.indicators, data.weights, data.inputs.exclusion_report(),
                                      data.imputed, data.panel, data.grid)
    logger.info('Total time taken %.1fs', time() - start)
    return 0


def _fit_one(data, spec, config, warm_starts=None):
    design = estimator.assemble_design(data.indicators, data.panel, spec, data.grid,
                                       scale=config.optimizer.regressor_scale)
    result = estimator.fit(design, data.weights, spec, config.optimizer, warm_starts=warm_starts)
    return estimator.fit_statistics(result, design)


def _compare_specs():
    """every (regressor set, error structure), restricted structures before 'all'"""
    return [estimator.ModelSpec(regressor_set=r, error_structure=s)
            for r in estimator.REGRESSOR_SETS for s in ERROR_STRUCTURES]


def cmd_fit(config):
    """
        fits the configured model, or the whole regressor set x error
        structure grid with --compare, and writes the fit tables. returns
        2 when any fit did not converge.
    """
    start = time()
    data = prepare(config)
    primary_spec = config.model_spec()
    specs = _compare_specs() if config.compare else [primary_spec]

    results = []
    by_spec = {}
    try:
        for n, spec in enumerate(specs):
            logger.info('Fitting %s / %s (%d of %d) ...', spec.regressor_set, spec.error_structure, n + 1, len(specs))
            warm_starts = None
            spatial = by_spec.get((spec.regressor_set, 'spatial'))
            serial = by_spec.get((spec.regressor_set, 'serial'))
            if spec.error_structure == 'all' and spatial is not None and serial is not None:
                zeros = 0.0 * spatial.lam
                warm_starts = [(spatial.lam, zeros), (zeros, serial.phi), (spatial.lam, serial.phi)]
            result = _fit_one(data, spec, config, warm_starts)
            results.append(result)
            by_spec[(spec.regressor_set, spec.error_structure)] = result
    except (DomainError, linalg.LinAlgError) as exc:
        if results:
            primary = by_spec.get((primary_spec.regressor_set, primary_spec.error_structure), results[-1])
            reporting.write_fit_outputs(config.out, primary, results, compare=config.compare)
        raise EstimationError('estimation of {} / {} failed: {}'.format(
            spec.regressor_set, spec.error_structure, exc))

    primary = by_spec[(primary_spec.regressor_set, primary_spec.error_structure)]
    reporting.write_fit_outputs(config.out, primary, results, compare=config.compare)

    failed = [r for r in results if not r.converged]
    for r in failed:
        logger.warning('%s / %s did not converge: %s', r.spec.regressor_set, r.spec.error_structure, r.convergence)
    logger.info('Total time taken %.1fs', time() - start)
    return 2 if failed else 0


def cmd_simulate(config):
    """synthetic input files plus truth.json, and the recovery study with --recover"""
    start = time()
    config.make_output_dir()
    sim = config.simulation
    world = simulate.SyntheticWorld(sim)
    world.write(config.out)

    if config.recover:
        logger.info('Running recovery study over %d replications ...', config.replications)
        detail, summary = simulate.run_recovery(sim, config.replications, 'all', config.optimizer)
        reporting.write_recovery(config.out, detail, summary)
    logger.info('Total time taken %.1fs', time() - start)
    return 0
