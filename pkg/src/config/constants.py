"""定数定義モジュール。

数値ガード、タスク既定値、グリッド軸、出力フォーマットおよび各種列挙型を定義する。
"""

from enum import Enum

# 活性化関数の数値ガード
GAIN_FLOOR: float = 1e-2  # オプティマイザ更新後の gain 下限
QR_RANK_TOL: float = 1e-12  # R 対角成分のランク判定しきい値

# Adam 既定値
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPS: float = 1e-8

# ReduceLROnPlateau 既定値
PLATEAU_PATIENCE: int = 3  # epochs
PLATEAU_FACTOR: float = 0.5
PLATEAU_THRESHOLD: float = 1e-3  # 相対改善しきい値
PLATEAU_MIN_LR: float = 1e-7

# Copy タスク
COPY_ALPHABET: int = 8
COPY_PAYLOAD: int = 10
COPY_DELAY_DESK: int = 50
COPY_DELAY_FULL: int = 200

# 数字系列タスク
DIGITS_TEST_FRACTION: float = 0.25
DIGITS_CLASSES: int = 10
TRANSFER_ROTATION_DEG: float = 45.0

# 文字言語モデル
CHARLM_CHUNK: int = 100  # truncated BPTT の窓長
CHARLM_SPLIT: tuple[float, float, float] = (0.9, 0.05, 0.05)
CHARLM_FALLBACK_VOCAB: int = 26  # コーパス無しの MI 入力源

# 学習の既定値
BATCH_SIZE: int = 64
LEARNING_RATE_DESK: float = 1e-3
LEARNING_RATE_FULL: float = 1e-4
HIDDEN_DESK: dict[str, int] = {"copy": 128, "digits": 128, "charlm": 256}
HIDDEN_FULL: dict[str, int] = {"copy": 128, "digits": 400, "charlm": 600}
EPOCHS_DESK: int = 20
EPOCHS_FULL: int = 100
COPY_ITERATIONS_DESK: int = 20_000
COPY_ITERATIONS_FULL: int = 100_000
COPY_EVAL_INTERVAL: int = 1_000  # iterations / 記録行

# 信号伝播診断
JN_SAMPLE_LOW: float = -5.0
JN_SAMPLE_HIGH: float = 5.0
JN_POWER_ITERS: int = 50
JN_SAMPLES: int = 200
LYAP_BURN_IN: int = 100
LYAP_STEPS: int = 1000
LYAP_SEEDS: int = 5
LYAP_H0_RANGE: float = 1.0
LYAP_CONVERGENCE_TOL: float = 1e-2
MI_NEIGHBORS: int = 3
MI_SAMPLES: int = 2000
MI_HORIZON: int = 20  # 推定前に駆動するステップ数

# 初期化グリッド: N = {1.0} ∪ {1.25k : 1 ≤ k ≤ 16}, S = {0, .25, .5, .75, 1}
GRID_GAINS: tuple[float, ...] = (1.0, *(1.25 * k for k in range(1, 17)))
GRID_SATURATIONS: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)

# 出力フォーマット
CHECKPOINT_MAGIC: bytes = b"GAMMARNN"
CHECKPOINT_VERSION: int = 2
CSV_SCHEMA_VERSION: int = 1
RECORD_SCHEMA_VERSION: int = 1
DATA_DIR_ENV: str = "GAMMA_RNN_DATA_DIR"

# 終了コード
EXIT_OK: int = 0
EXIT_CONFIG: int = 1
EXIT_NUMERICAL: int = 2


class Scenario(str, Enum):
    """活性化形状パラメータの適応シナリオ。"""

    STATIC = "static"
    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"

    @property
    def adaptive(self) -> bool:
        """(n, s) が最適化対象かどうか。"""
        return self is not Scenario.STATIC

    @classmethod
    def list_all(cls) -> list[str]:
        """全シナリオ名をリストで返す。"""
        return [s.value for s in cls]


class TaskId(str, Enum):
    """学習タスク種別。"""

    COPY = "copy"
    DIGITS = "digits"
    CHARLM = "charlm"

    @classmethod
    def list_all(cls) -> list[str]:
        """全タスク名をリストで返す。"""
        return [t.value for t in cls]


class Measure(str, Enum):
    """グリッド走査で計測する量。"""

    JN = "jn"
    MLE = "mle"
    MI = "mi"
    TRAIN_PERF = "trainperf"

    @classmethod
    def list_all(cls) -> list[str]:
        """全計測名をリストで返す。"""
        return [m.value for m in cls]


class InitScheme(str, Enum):
    """正規分布による重み初期化方式。"""

    GLOROT_NORMAL = "glorot_normal"
    KAIMING = "kaiming"


class OrthogonalScheme(str, Enum):
    """再帰行列の直交初期化方式。"""

    QR_GAUSSIAN = "qr_gaussian"
    BLOCK_ROTATION = "block_rotation"


class NormKind(str, Enum):
    """ヤコビアンのノルム種別。"""

    OPERATOR = "operator"
    FROBENIUS = "frobenius"


# タスクごとの入力重み初期化
INPUT_INIT: dict[TaskId, InitScheme] = {
    TaskId.COPY: InitScheme.GLOROT_NORMAL,
    TaskId.DIGITS: InitScheme.KAIMING,
    TaskId.CHARLM: InitScheme.KAIMING,
}
