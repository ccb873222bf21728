"""shapeci - pivotal confidence intervals for shape-constrained estimators."""

__version__ = "0.1.0"
__author__ = "shapeci developers"
__description__ = (
    "Locally normalized error confidence intervals for convex regression, "
    "log-concave and convex nonincreasing densities"
)

__all__ = ["__version__", "__author__", "__description__"]
