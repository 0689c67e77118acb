"""
routing/policy.py
-----------------
Politique de selection BGP (modele Gao-Rexford) : classe de route,
etiquettes d'origine et regle de departage des egalites.
"""

from dataclasses import dataclass
from enum import Enum, IntEnum

import mmh3


class RouteClass(IntEnum):
    """Relation par laquelle une route a ete apprise (plus grand = prefere)."""
    PROVIDER = 1
    PEER = 2
    CUSTOMER = 3


class Label(str, Enum):
    """Etiquette de l'origine d'une annonce."""
    LEGIT = "legit"
    ATTACKER = "attacker"


class TieSide(str, Enum):
    """Cote favorise en cas d'egalite (classe et longueur identiques)."""
    FAVOR_ATTACKER = "attacker"
    FAVOR_LEGITIMATE = "legit"
    RANDOM = "random"


@dataclass(frozen=True)
class TieBreak:
    """
    Regle de departage.

    Le cote favorise est examine en premier ; a cote egal, le plus petit
    numero d'AS de prochain saut l'emporte. Avec RANDOM, chaque AS tire
    son propre cote a partir de (seed, asn), de facon reproductible.

    Attributs :
        side : cote favorise
        seed : graine du tirage par AS (RANDOM uniquement)
    """
    side: TieSide = TieSide.FAVOR_ATTACKER
    seed: int = 0

    @classmethod
    def from_cli(cls, value: str, seed: int = 0) -> "TieBreak":
        """Regle issue de l'option --tie (attacker, legit ou random)."""
        return cls(TieSide(value), seed or 0)

    def favored_label(self, asn: int) -> Label:
        """Etiquette gagnante d'une egalite a l'AS donne."""
        if self.side is TieSide.FAVOR_ATTACKER:
            return Label.ATTACKER
        if self.side is TieSide.FAVOR_LEGITIMATE:
            return Label.LEGIT
        coin = mmh3.hash(f"{self.seed}:{asn}", signed=False) & 1
        return Label.ATTACKER if coin else Label.LEGIT

    def rank(self, asn: int, label) -> int:
        """0 si l'etiquette est favorisee a cet AS, 1 sinon."""
        return 0 if label == self.favored_label(asn) else 1

    def flipped(self) -> "TieBreak":
        """Meme regle avec le cote inverse (RANDOM reste RANDOM)."""
        if self.side is TieSide.FAVOR_ATTACKER:
            return TieBreak(TieSide.FAVOR_LEGITIMATE, self.seed)
        if self.side is TieSide.FAVOR_LEGITIMATE:
            return TieBreak(TieSide.FAVOR_ATTACKER, self.seed)
        return self


FAVOR_ATTACKER = TieBreak(TieSide.FAVOR_ATTACKER)
FAVOR_LEGITIMATE = TieBreak(TieSide.FAVOR_LEGITIMATE)
