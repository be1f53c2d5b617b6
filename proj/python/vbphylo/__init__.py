"""Variational Bayesian phylogenetic inference: subsplit Bayesian networks
over tree topologies with structured amortized branch-length and node-height
approximations, trained by multi-sample stochastic gradient ascent."""

try:
    from ._vbphylo import *  # noqa: F401,F403
    from ._vbphylo import __doc__ as _core_doc  # noqa: F401
except ImportError:  # running against a build tree without an installed package
    from _vbphylo import *  # noqa: F401,F403

__all__ = [
    "Support",
    "SbnModel",
    "build_support",
    "support_from_json",
    "canonical_newick",
    "taxon_names",
    "simulate",
    "train_unrooted",
    "train_timetree",
    "sample_checkpoint",
    "evidence",
    "tree_marginal_likelihood",
    "kl_topology",
]
