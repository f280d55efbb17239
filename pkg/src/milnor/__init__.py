"""Finite-stage Milnor classifying spaces, classifying maps and connections for concrete Lie groups."""

from .base_complex import BasePoint, ChartedCurve, catalog, catalog_loop
from .bundle_cocycle import CocycleBundle, bundle_from_json, clutching_bundle, trivial_bundle, validate
from .classify import classifying_point, contract, join_homotopy, reconstruct_cocycle
from .connection import chern_number, gauge_transform_check, holonomy, horizontal_lift, local_connection
from .homotopy_tables import PiTable, pi_bg, verify_les
from .lie_group import SO3, CircleU1, GLn, IrrationalTorus, TorusK, exp_curve
from .milnor_join import JoinPoint, act, join_equiv, make_join, to_bg

__version__ = "0.1.0"

__all__ = [
    "BasePoint", "ChartedCurve", "catalog", "catalog_loop",
    "CocycleBundle", "bundle_from_json", "clutching_bundle", "trivial_bundle", "validate",
    "classifying_point", "contract", "join_homotopy", "reconstruct_cocycle",
    "chern_number", "gauge_transform_check", "holonomy", "horizontal_lift", "local_connection",
    "PiTable", "pi_bg", "verify_les",
    "SO3", "CircleU1", "GLn", "IrrationalTorus", "TorusK", "exp_curve",
    "JoinPoint", "act", "join_equiv", "make_join", "to_bg",
]
