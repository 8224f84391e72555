from .integrator import McEstimate, mc_integrate
from .rng import StreamTag, substream
from .tables import Table, emit_csv, read_csv
