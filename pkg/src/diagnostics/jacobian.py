"""ヤコビアンノルムによる勾配安定性の指標。"""

import numpy as np

from src.config.constants import JN_POWER_ITERS, JN_SAMPLE_HIGH, JN_SAMPLE_LOW, NormKind
from src.core.linalg import RngStream, as_generator, batched_spectral_norm
from src.core.rnn import RnnModel, jacobians_at

_BLOCK = 128  # 一度に評価するサンプル数


def mean_jacobian_norm(
    model: RnnModel,
    samples: int,
    rng: RngStream | np.random.Generator,
    norm: NormKind = NormKind.OPERATOR,
    iters: int = JN_POWER_ITERS,
) -> float:
    """入力ゼロでの 1 ステップヤコビアンのノルムを h ~ U(−5, 5)^N で平均する。

    Args:
        model: RNN モデル
        samples: 隠れ状態のサンプル数
        rng: 乱数源
        norm: OPERATOR（ランダム開始のべき乗法による作用素 2-ノルム）または FROBENIUS
        iters: べき乗法の反復回数

    Returns:
        ノルムの平均
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    gen = as_generator(rng)
    hs = gen.uniform(JN_SAMPLE_LOW, JN_SAMPLE_HIGH, (samples, model.hidden_size))
    norms = []
    for start in range(0, samples, _BLOCK):
        jac = jacobians_at(model, hs[start : start + _BLOCK])
        if norm is NormKind.FROBENIUS:
            norms.append(np.linalg.norm(jac, axis=(1, 2)))
        else:
            norms.append(batched_spectral_norm(jac, iters, gen))
    return float(np.concatenate(norms).mean())
