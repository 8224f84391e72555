from .pipeline import ExperimentPipeline, final_position_errors
from .scenario import Scenario, SweepSpec, default_sweep, load_scenario, scenario_from_dict
