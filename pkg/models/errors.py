"""
models/errors.py
----------------
Exceptions metier du projet.
Toutes heritent de RelayNetError pour que la CLI puisse les intercepter
d'un seul bloc et renvoyer le code de sortie 1.
"""

from enum import Enum


class RelayNetError(Exception):
    """Erreur de base pour tout le projet."""


# =====================================================================
# TOPOLOGIE
# =====================================================================

class TopologyParseError(RelayNetError):
    """Ligne mal formee dans un fichier de relations ou de poids."""

    def __init__(self, message: str, line_number: int = 0):
        self.line_number = line_number
        prefix = f"ligne {line_number} : " if line_number else ""
        super().__init__(f"{prefix}{message}")


class TopologyValidationError(RelayNetError):
    """Le graphe viole un invariant (boucle, relations contradictoires...)."""


class UnknownASError(RelayNetError):
    """Des AS references dans le fichier de poids sont absents du graphe."""

    def __init__(self, offenders):
        self.offenders = sorted(offenders)
        listed = ", ".join(str(asn) for asn in self.offenders)
        super().__init__(f"AS inconnus dans le graphe : {listed}")


# =====================================================================
# ANALYSE / PLACEMENT
# =====================================================================

class PathContractError(RelayNetError):
    """Deux chemins compares ne partent pas du meme AS victime."""


class PlacementInfeasibleError(RelayNetError):
    """Aucun candidat eligible a un tour de l'algorithme glouton."""

    def __init__(self, round_index: int, selected: int, k: int):
        self.round_index = round_index
        super().__init__(
            f"tour {round_index} : aucun candidat adjacent a "
            f"min({k}, {selected}) relais deja choisis"
        )


class ConnectivityVerificationError(RelayNetError):
    """Le plan final n'atteint pas la k-connexite demandee."""

    def __init__(self, required: int, achieved: int):
        self.required = required
        self.achieved = achieved
        super().__init__(
            f"connexite verifiee {achieved} inferieure a la valeur requise {required}"
        )


# =====================================================================
# PROTOCOLE / SIMULATION
# =====================================================================

class DecodeFailure(Enum):
    """Raisons de rejet d'un datagramme."""
    UNKNOWN_KIND = "unknown_kind"
    TRUNCATED = "truncated"
    BAD_FLAGS = "bad_flags"
    BAD_VERSION = "bad_version"
    TRAILING_BYTES = "trailing_bytes"
    INVALID_FIELD = "invalid_field"


class DecodeError(RelayNetError):
    """Datagramme impossible a decoder."""

    def __init__(self, reason: DecodeFailure, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason.value}{' : ' + detail if detail else ''}")


class ScenarioConfigError(RelayNetError):
    """Fichier de scenario incoherent (roles, noms, ensembles)."""
