from models.errors import (
    RelayNetError, TopologyParseError, TopologyValidationError, UnknownASError, PathContractError,
    PlacementInfeasibleError, ConnectivityVerificationError, DecodeError, DecodeFailure, ScenarioConfigError,
)
from models.as_graph import Relationship, Edge, ASGraph, PeerGraph, parse_relationships, load_client_weights, load_graph, candidate_relays
from models.block import Block, mine_block, GENESIS_HASH
