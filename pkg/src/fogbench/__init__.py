"""Cloud/edge benchmarking harness.

Runs workloads in cloud-only, edge-only and cloud-edge deployments on real
or simulated nodes and reports communication, computation and concurrency
metrics for each.
"""

__version__ = "0.1.0"

from .errors import ConfigError, FogbenchError
from .metrics import AppMetrics, TimingBreakdown, aggregate, compute_app_metrics, estimate_cost
from .model import (AssetSpec, DeploymentMode, NodeSpec, Profile, RunConfig, ServicePlacement, ServiceSpec, Tier,
                    VirtualParams, WorkloadSpec, placements_for_mode, validate_run_config)
from .orchestrator import ResultSet, run_benchmark
from .stress import StressLevel, stress_profile
from .workloads import make_profile, register_plugin, run_pipeline
