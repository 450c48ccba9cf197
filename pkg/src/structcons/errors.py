"""Exception hierarchy shared by all modules."""


class ConsensusError(Exception):
    """Base class for every error raised by this package."""


# topology
class InvalidTopology(ConsensusError):
    pass


class NoSpanningTree(InvalidTopology):
    pass


class LeaderHasInEdge(InvalidTopology):
    pass


class DeltaTooLarge(InvalidTopology):
    pass


# spectral
class NoConvergence(ConsensusError):
    pass


class EigsFailed(ConsensusError):
    pass


class NoRootAboveOne(ConsensusError):
    pass


class EmptyInterval(ConsensusError):
    pass


class Infeasible(ConsensusError):
    pass


# paillier
class PrimeGenFailed(ConsensusError):
    pass


class PlaintextOutOfRange(ConsensusError):
    pass


class InvalidCiphertext(ConsensusError):
    pass


class ValueOutOfRange(ConsensusError):
    """A real value does not fit the fixed-point codec range."""


CodecOverflow = ValueOutOfRange


class DecryptFailed(ConsensusError):
    pass


# adversary
class NotNeighbors(ConsensusError):
    pass


class InfeasibleWitness(ConsensusError):
    pass


# cli
class ConfigError(ConsensusError):
    pass
