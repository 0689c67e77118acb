"""
netsim/base_node.py
-------------------
Classe de base de tous les noeuds simules.
Gere l'identite (nom, adresse), le logger et l'interface avec la boucle
d'evenements. Tout noeud specialise herite de cette classe.
"""

import logging


class BaseNode:
    """
    Noeud du reseau simule.

    Fournit :
    - Identite (nom, ip, port)
    - Logging
    - Points d'entree appeles par le simulateur (datagramme, transfert logique, timer)

    Attributs de classe :
        ROLE : str - role declare dans les fichiers de scenario
    """

    ROLE = "node"

    def __init__(self, name: str, ip: str, port: int = 8333):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.name = name
        self.ip = ip
        self.port = port
        self.scheduled = set()

    @property
    def address(self) -> tuple:
        return (self.ip, self.port)

    def start(self, sim):
        """Appele une fois a l'instant 0."""

    def on_datagram(self, sim, datagram):
        self.logger.debug(f"{self.name} ignore {datagram.message!r}")

    def on_logical(self, sim, kind: str, src, payload):
        self.logger.debug(f"{self.name} ignore le transfert {kind}")

    def on_timer(self, sim):
        """Echeance programmee via sim.schedule_timer."""

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name}, {self.ip})"
