from .render import PlotSpec, SchemaError, read_summary, render

__version__ = "0.1.0"
