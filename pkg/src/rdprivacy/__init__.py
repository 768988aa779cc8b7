"""Utility-privacy tradeoffs for discrete database sources.

Rate-distortion-equivocation solvers, a sanitization channel pipeline and a
two-stage disclosure checker for finite-alphabet attribute models.
"""
from ._kernels import BACKEND
from .errors import (AxisError, CSVRowError, InfeasibleDistortionError, InfeasibleError,
                     InfeasiblePrivacyError, InputError, OrderingError, PlanStateError,
                     RDPrivacyError, SchemaError, SizeError, UnsupportedModelError,
                     ValidationError)
from .oracle import brute_force_rde
from .prob import (Alphabet, Channel, JointPmf, attach_channel, compose, conditional_entropy,
                   entropy, marginalize, mutual_information)
from .rd import DistortionMatrix, RDPoint, distortion_bounds, rate_distortion, rd_curve
from .rde import (AuxChannelSolution, TradeoffPoint, dispatch_special_case, gamma_of_d,
                  rate_de, tradeoff_region)
from .sanitize import AuditReport, SanitizationPlan, audit, sanitize, synthesize_channel
from .source import (AttributeRoles, Database, DistortionTable, PrivacySpec, SourceSpec,
                     UtilityConstraint, UtilitySpec, dump_spec, estimate_empirical, ingest_csv,
                     load_spec, load_spec_file, make_spec)
from .successive import StagePlan, check_successive, disclosure_rates

__version__ = "0.1.0"
