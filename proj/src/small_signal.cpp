#include "redgrid/small_signal.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace redgrid {

Mat jacobian_central(const std::function<Vec(const Vec&)>& f, const Vec& x, double scale) {
    const Eigen::Index n = x.size();
    const Eigen::Index m = f(x).size();
    Mat J(m, n);
    Vec xp = x, xm = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = scale * std::max(1.0, std::abs(x(k)));
        xp(k) = x(k) + h;
        xm(k) = x(k) - h;
        J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
        xp(k) = x(k);
        xm(k) = x(k);
    }
    return J;
}

Mat jacobian_forward(const std::function<Vec(const Vec&)>& f, const Vec& x, double scale) {
    const Eigen::Index n = x.size();
    const Vec f0 = f(x);
    Mat J(f0.size(), n);
    Vec xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double h = scale * std::max(1.0, std::abs(x(k)));
        xp(k) = x(k) + h;
        J.col(k) = (f(xp) - f0) / h;
        xp(k) = x(k);
    }
    return J;
}

LinearModel linearize_external(const AreaModel& area, const NetworkSolver& solver, const Vec& x0,
                               const Vec& u0, double equilibrium_tol) {
    const Vec f0 = area.rhs_external(solver, x0, u0);
    const double res = f0.size() > 0 ? f0.cwiseAbs().maxCoeff() : 0.0;
    if (res > equilibrium_tol) throw NotAnEquilibrium(res);

    LinearModel lin;
    lin.x0 = x0;
    lin.u0 = u0;
    lin.A = jacobian_central([&](const Vec& x) { return area.rhs_external(solver, x, u0); }, x0);
    lin.B = jacobian_central([&](const Vec& u) { return area.rhs_external(solver, x0, u); }, u0);

    // Outputs: boundary current injections, rectangular components.
    auto outputs = [&](const Vec& x, const Vec& u) {
        const CVec ib = area.publish_boundary_currents(solver, x, u);
        Vec y(2 * ib.size());
        for (Eigen::Index k = 0; k < ib.size(); ++k) {
            y(2 * k) = ib(k).real();
            y(2 * k + 1) = ib(k).imag();
        }
        return y;
    };
    lin.C = jacobian_central([&](const Vec& x) { return outputs(x, u0); }, x0);
    lin.D = jacobian_central([&](const Vec& u) { return outputs(x0, u); }, u0);
    lin.y0 = area.publish_boundary_currents(solver, x0, u0);
    return lin;
}

LinearModel linearize_monolithic(const AreaModel& area, const NetworkSolver& solver, const Vec& x0,
                                 double equilibrium_tol) {
    const Vec f0 = area.rhs(solver, x0);
    const double res = f0.size() > 0 ? f0.cwiseAbs().maxCoeff() : 0.0;
    if (res > equilibrium_tol) throw NotAnEquilibrium(res);
    LinearModel lin;
    lin.x0 = x0;
    lin.A = jacobian_central([&](const Vec& x) { return area.rhs(solver, x); }, x0);
    return lin;
}

ModalData eigensolve(const Mat& A) {
    if (A.rows() != A.cols()) throw DimensionMismatch("eigensolve needs a square matrix");
    if (!A.allFinite()) throw ConvergenceFailure("matrix has non-finite entries");
    const Eigen::Index n = A.rows();

    Eigen::EigenSolver<Mat> es(A, true);
    if (es.info() != Eigen::Success) throw ConvergenceFailure("QR iteration did not converge");

    ModalData modal;
    modal.eigenvalues = es.eigenvalues();
    modal.right = es.eigenvectors();

    // Left eigenvectors from Phi^{-1}: rows satisfy Psi A = lambda Psi and the
    // biorthonormal scaling Psi_i Phi_i = 1 by construction.
    Eigen::PartialPivLU<CMat> lu(modal.right);
    modal.left = lu.solve(CMat::Identity(n, n));

    const double biorth = (modal.left * modal.right - CMat::Identity(n, n)).cwiseAbs().maxCoeff();
    if (biorth > 1e-7) {
        // Ill-conditioned right basis: recover left vectors independently from
        // A^T and rescale each pair.
        Eigen::EigenSolver<Mat> est(A.transpose(), true);
        if (est.info() != Eigen::Success) throw ConvergenceFailure("transpose QR iteration failed");
        CMat left = CMat::Zero(n, n);
        std::vector<bool> used(static_cast<std::size_t>(n), false);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = -1;
            double best_dist = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double d = std::abs(est.eigenvalues()(j) - modal.eigenvalues(i));
                if (best < 0 || d < best_dist) {
                    best = j;
                    best_dist = d;
                }
            }
            used[static_cast<std::size_t>(best)] = true;
            const Eigen::RowVectorXcd psi = est.eigenvectors().col(best).transpose();
            const Complex s = psi * modal.right.col(i);
            if (std::abs(s) < 1e-300) throw ConvergenceFailure("defective eigenpair, cannot scale");
            left.row(i) = psi / s;
        }
        modal.left = left;
        const double b2 = (modal.left * modal.right - CMat::Identity(n, n)).cwiseAbs().maxCoeff();
        if (b2 > 1e-7)
            throw ConvergenceFailure("biorthogonality residual " + std::to_string(b2));
    }

    modal.frequency_hz.resize(n);
    modal.damping_ratio.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex lam = modal.eigenvalues(i);
        modal.frequency_hz(i) = std::abs(lam.imag()) / (2.0 * M_PI);
        const double mag = std::abs(lam);
        modal.damping_ratio(i) = mag > 0.0 ? -lam.real() / mag : 0.0;
    }
    return modal;
}

PFTable participation_factors(const ModalData& modal, std::size_t gen_count) {
    const Eigen::Index n = modal.eigenvalues.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex s = modal.left.row(i) * modal.right.col(i);
        if (std::abs(s - Complex(1.0, 0.0)) > 1e-8)
            throw NotNormalized("Psi_" + std::to_string(i) + " . Phi_" + std::to_string(i) + " = " +
                                std::to_string(s.real()) + (s.imag() < 0 ? "" : "+") +
                                std::to_string(s.imag()) + "j");
    }

    PFTable pf;
    pf.raw.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) pf.raw(k, i) = modal.right(k, i) * modal.left(i, k);
    pf.magnitude = pf.raw.cwiseAbs();

    pf.normalized.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = pf.magnitude.col(i).maxCoeff();
        pf.normalized.col(i) = mx > 0.0 ? (pf.magnitude.col(i) / mx).eval() : pf.magnitude.col(i);
    }

    if (gen_count > 0) {
        if (static_cast<Eigen::Index>(gen_count) * kSlotsPerGen != n)
            throw DimensionMismatch("state count is not 9 per generator");
        pf.gen_aggregate.resize(static_cast<Eigen::Index>(gen_count), n);
        for (Eigen::Index g = 0; g < static_cast<Eigen::Index>(gen_count); ++g)
            pf.gen_aggregate.row(g) =
                pf.normalized.middleRows(g * kSlotsPerGen, kSlotsPerGen).colwise().maxCoeff();
    }
    return pf;
}

DominantModes select_dominant_modes(const ModalData& modal, const Vec& dx0, int count, double f_max) {
    const Eigen::Index n = modal.eigenvalues.size();
    if (dx0.size() != n) throw DimensionMismatch("dx0 length does not match state count");
    if (count < 1) throw DimensionMismatch("dominant-mode count must be >= 1");

    std::vector<DominantMode> candidates;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex lam = modal.eigenvalues(i);
        if (lam.imag() <= 0.0) continue;  // oscillatory pairs counted once
        if (modal.frequency_hz(i) >= f_max) continue;
        const Complex modal_coord = modal.left.row(i) * dx0.cast<Complex>();
        const double peak_obs = modal.right.col(i).cwiseAbs().maxCoeff();
        candidates.push_back(
            {i, std::abs(modal_coord) * peak_obs, modal.frequency_hz(i), modal.damping_ratio(i)});
    }
    if (candidates.empty())
        throw NoCandidates("no oscillatory mode below " + std::to_string(f_max) + " Hz");

    std::sort(candidates.begin(), candidates.end(), [](const DominantMode& a, const DominantMode& b) {
        if (a.excitation != b.excitation) return a.excitation > b.excitation;
        return a.mode < b.mode;
    });
    if (candidates.front().excitation <= 0.0) throw NoCandidates("no excitation (dx0 = 0)");

    DominantModes out;
    for (int k = 0; k < count && k < static_cast<int>(candidates.size()); ++k)
        out.modes.push_back(candidates[static_cast<std::size_t>(k)]);
    return out;
}

}  // namespace redgrid
