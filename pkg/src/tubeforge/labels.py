from __future__ import annotations

import enum


class Label(str, enum.Enum):
    FIGHT = "fight"
    NONFIGHT = "nonfight"

    @classmethod
    def parse(cls, value: str | Label) -> Label:
        if isinstance(value, Label):
            return value
        key = value.strip().lower().replace("-", "").replace("_", "")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown label {value!r}; expected 'fight' or 'nonfight'") from None

    def __str__(self) -> str:
        return self.value
