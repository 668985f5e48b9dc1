from __future__ import annotations

from typing import Any, Dict


class KenyonError(Exception):
    """Raiz de todos os erros do pacote.

    `context` guarda os campos estruturados (chave, episódio, linha...) que o
    CLI serializa no registro de erro.
    """

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def to_record(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": self.message, **self.context}


class ConfigurationError(KenyonError, ValueError):
    def __init__(self, message: str, key: str | None = None) -> None:
        super().__init__(message, key=key)
        self.key = key


class ContractViolation(KenyonError, ValueError):
    pass


class ReservoirConstructionError(KenyonError, RuntimeError):
    pass


class StimulusFileError(KenyonError, ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None) -> None:
        super().__init__(message, row=row, column=column)
        self.row = row
        self.column = column


class TrainingError(KenyonError, RuntimeError):
    def __init__(self, message: str, episode: int, algorithm: str) -> None:
        super().__init__(message, episode=episode, algorithm=algorithm)
        self.episode = episode
        self.algorithm = algorithm


class UndefinedMeasureError(KenyonError, ValueError):
    pass
