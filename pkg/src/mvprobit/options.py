from dataclasses import dataclass, asdict


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances shared by both estimation stages.

    Attributes
    ----------
    gtol : float
        Stage-1 convergence: max absolute entry of the summed score.
    max_iter : int
        Newton iteration cap per univariate probit.
    separation_threshold : float
        Largest allowed |coefficient * column SD| before the fit is
        declared separated.
    rho_eps : float
        Stage-2 search is confined to [-1 + rho_eps, 1 - rho_eps].
    rho_xtol : float
        Absolute tolerance on the correlation at the stage-2 optimum.
    boundary_tol : float
        A correlation this close to a clamp sets ``boundary_flag``.
    n_jobs : int
        Worker threads for per-component and per-pair fits (1 = serial).
    """

    gtol: float = 1e-8
    max_iter: int = 100
    separation_threshold: float = 1e4
    rho_eps: float = 1e-6
    rho_xtol: float = 1e-8
    boundary_tol: float = 1e-5
    n_jobs: int = 1

    def __post_init__(self):
        if self.gtol <= 0 or self.rho_xtol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.rho_eps < 0.5:
            raise ValueError("rho_eps must lie in (0, 0.5)")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")

    def to_dict(self):
        return asdict(self)
