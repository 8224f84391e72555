from .geometry import KinematicState, SiteSpeeds, BistaticGeometry, build_geometry
from .tmu import SignalModel, MeasCov
from .clutter import ClutterModel, MeasurementSet
from .bounds import BoundVariant, FimState, McIntegralConfig, InfoContext, MeasurementInfo
from .tracker import TrackEstimate, MotionModel, EkfPdaTracker
from .control import ControlCommand, ControlPolicy, ControlConfig, ManeuverLimits
