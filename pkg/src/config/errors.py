"""例外定義モジュール。

設定エラー（終了コード 1）と数値エラー（終了コード 2）を区別する。
"""


class GammaRnnError(Exception):
    """gamma-rnn の基底例外。"""


class ConfigError(GammaRnnError, ValueError):
    """設定・チェックポイント・タスクの組み合わせが不正。"""


class DimensionError(GammaRnnError, ValueError):
    """行列やベクトルの次元が一致しない。"""


class FormatError(GammaRnnError, ValueError):
    """IDX ファイルやチェックポイントの形式が不正。"""


class NumericalError(GammaRnnError, ArithmeticError):
    """数値計算の失敗。"""


class NonFiniteError(NumericalError):
    """NaN や無限大が発生した。

    Attributes:
        name: 対象のテンソル名・量の名前
        step: 発生した時刻インデックスまたはステップ番号
    """

    def __init__(self, name: str, step: int | None = None) -> None:
        self.name = name
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"non-finite value in {name}{where}")


class SingularMatrixError(NumericalError):
    """QR 分解でランク落ちを検出した。

    Attributes:
        index: 閾値を下回った R の対角インデックス
        step: Lyapunov 反復のステップ番号
    """

    def __init__(self, index: int, value: float, step: int | None = None) -> None:
        self.index = index
        self.value = value
        self.step = step
        where = f" at step {step}" if step is not None else ""
        super().__init__(
            f"rank deficiency: |R[{index}, {index}]| = {value:.3e}{where}"
        )


class DegenerateSampleError(NumericalError):
    """相互情報量推定のサンプルが退化している。

    Attributes:
        column: 分散ゼロの列インデックス（該当する場合）
    """

    def __init__(self, message: str, column: int | None = None) -> None:
        self.column = column
        super().__init__(message)
