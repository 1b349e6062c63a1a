"""Exception and warning types shared across the library."""


class HitchinLimitsError(Exception):
    """Base class for all library errors."""


class ZeroPeriod(HitchinLimitsError):
    """A segment period is zero; exponents are undefined."""


class OpenPath(HitchinLimitsError):
    """A closed path was required but an open one was supplied."""


class DegeneratePath(HitchinLimitsError):
    """Path collapses to a point (e.g. a backtracking edge pair)."""


class NotConverged(HitchinLimitsError):
    """An iterative routine exceeded its iteration budget."""


class NewtonDiverged(NotConverged):
    """Newton iteration failed to reduce the residual.

    Carries the residual history so the failure can be inspected.
    """

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class GridTooCoarse(HitchinLimitsError):
    """Discrete maximum principle violated; the grid cannot support the solve."""


class StepUnstable(HitchinLimitsError):
    """ODE integration step grew too fast even after repeated halving."""


class StokesEndpoint(HitchinLimitsError):
    """An arc endpoint lies on a Stokes direction; perturb before calling."""


class ConfigurationInvalid(HitchinLimitsError):
    """A turn configuration violates the geodesic angle condition."""


class NonUnimodular(HitchinLimitsError):
    """Matrix determinant is not 1 within tolerance."""


class OriginSingular(HitchinLimitsError):
    """The local model cannot be evaluated at the cone point itself."""


class NonDeformable(HitchinLimitsError):
    """Triangle group admits no nonzero cubic differential."""


class UnboundedSearch(HitchinLimitsError):
    """Segment tracing left a bordered surface and could not be completed."""


class WallAmbiguity(UserWarning):
    """A diagonal factor has a doubled top eigenvalue (wall-direction segment).

    Not fatal: the leading term then carries several top entries, all with
    positive coefficients.
    """
