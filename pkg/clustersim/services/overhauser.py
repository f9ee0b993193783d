"""Gaussian Overhauser-field sampling and Monte-Carlo averaging."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from clustersim.exceptions import SampleFailureError
from clustersim.schemas import MonteCarloConfig
from clustersim.settings import get_worker_count

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OverhauserSample:
    b_o: Tuple[float, float, float]  # mT
    sample_index: int
    seed: int


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int


def sample_field(master_seed: int, index: int, sigma_o: float) -> OverhauserSample:
    """Field for one sample; depends only on (master_seed, index)"""
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
    if sigma_o == 0.0:
        return OverhauserSample((0.0, 0.0, 0.0), index, seed)
    generator = np.random.Generator(np.random.PCG64(sequence))
    bx, by, bz = generator.normal(0.0, sigma_o, size=3)
    return OverhauserSample((float(bx), float(by), float(bz)), index, seed)


class MonteCarloService:
    """Evaluates a per-sample simulation over Overhauser configurations.

    Samples may run on a thread pool; results are always stacked in sample
    index order so the reduction is bitwise reproducible.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers if workers is not None else get_worker_count()

    def samples(self, config: MonteCarloConfig, sigma_o: float) -> List[OverhauserSample]:
        # Every sample is identical without disorder
        count = 1 if sigma_o == 0.0 else config.n_samples
        return [sample_field(config.master_seed, i, sigma_o) for i in range(count)]

    def evaluate(self, config: MonteCarloConfig, sigma_o: float,
                 simulation: Callable[[OverhauserSample], np.ndarray]) -> np.ndarray:
        """Per-sample results stacked along axis 0"""
        samples = self.samples(config, sigma_o)
        logger.info(f"Evaluating {len(samples)} Overhauser samples on {self.workers} worker(s)")

        def run(sample: OverhauserSample) -> np.ndarray:
            try:
                return np.asarray(simulation(sample))
            except SampleFailureError:
                raise
            except Exception as e:
                logger.error(f"Sample {sample.sample_index} failed: {e}")
                raise SampleFailureError(sample.sample_index, e) from e

        if self.workers > 1 and len(samples) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                results = list(executor.map(run, samples))
        else:
            results = [run(sample) for sample in samples]
        return np.stack(results)

    @staticmethod
    def reduce(stack: np.ndarray) -> MonteCarloEstimate:
        n = stack.shape[0]
        mean = np.mean(stack, axis=0)
        if n > 1:
            stderr = np.std(stack, axis=0, ddof=1) / np.sqrt(n)
        else:
            stderr = np.zeros(mean.shape)
        return MonteCarloEstimate(mean, stderr, n)

    def average(self, config: MonteCarloConfig, sigma_o: float,
                simulation: Callable[[OverhauserSample], np.ndarray]) -> MonteCarloEstimate:
        return self.reduce(self.evaluate(config, sigma_o, simulation))
