"""Compressed, queryable storage for discretized 3D trajectories."""
from .container import dumps, load, loads, save, stats
from .errors import BuildError, CorruptStoreError, NotFoundError, TracubeError
from .events import CellEvent, Tracks
from .grammar import RuleTable, repair_compress
from .ingest import GridConfig, RawRecord, SynthParams, gen_synthetic, interpolate_gaps, normalize, parse_csv
from .k3tree import K3Tree
from .movement import pack_movement, unpack_movement
from .oracle import OracleStore
from .query import QueryEngine
from .snapshot import Snapshot
from .store import Store, StoreConfig, build_store
from .succinct import BitVector, DacSequence

__version__ = "0.1.0"

__all__ = [
    "BitVector",
    "BuildError",
    "CellEvent",
    "CorruptStoreError",
    "DacSequence",
    "GridConfig",
    "K3Tree",
    "NotFoundError",
    "OracleStore",
    "QueryEngine",
    "RawRecord",
    "RuleTable",
    "Snapshot",
    "Store",
    "StoreConfig",
    "SynthParams",
    "Tracks",
    "TracubeError",
    "build_store",
    "dumps",
    "gen_synthetic",
    "interpolate_gaps",
    "load",
    "loads",
    "normalize",
    "pack_movement",
    "parse_csv",
    "repair_compress",
    "save",
    "stats",
    "unpack_movement",
]
