#pragma once

#include <vector>

#include "roadid/error.hpp"
#include "roadid/model.hpp"
#include "roadid/numerics.hpp"

namespace roadid {

/**
 * @brief Window-stacked observation matrices for a time-invariant system.
 *
 * Stacking y_k .. y_{k+N} gives, relative to the state at k,
 *
 *   ybar_k = Cbar x_k + Dbar rbar_k - Hbar rbar_{k-1} + Jbar wbar_k + vbar_k
 *
 * with rbar_k = [r_k .. r_{k+N}], rbar_{k-1} = [r_{k-1} .. r_{k+N-1}],
 * wbar_k = [w_{k-1} .. w_{k+N-1}] and vbar_k = [v_k .. v_{k+N}].
 *
 * The smoother works relative to the previous posterior x_{k-1} instead,
 * where every input in the window is unknown and only r_{k-1} is carried over:
 *
 *   ybar_k = Gamma x_{k-1} + Fbar rbar_k - Xi r_{k-1} + Hbreve wbar_k + vbar_k
 *
 * Fbar collects the B, G, D and H paths of r_k .. r_{k+N}; Xi is the total
 * sensitivity to r_{k-1}.
 */
struct ExtendedSystem {
    int N = 0;
    Eigen::Index nx = 0, m = 0, q = 0;
    DiscreteSystem sys;

    Matrix Cbar;    ///< (N+1)q x nx
    Matrix Dbar;    ///< (N+1)q x (N+1)m
    Matrix Hbar;    ///< (N+1)q x (N+1)m
    Matrix Jbar;    ///< (N+1)q x (N+1)nx, first block column zero
    Matrix Xi;      ///< (N+1)q x m
    Matrix Gamma;   ///< Cbar * A
    Matrix Hbreve;  ///< Jbar with Cbar in its first block column
    Matrix Fbar;    ///< (N+1)q x (N+1)m input sensitivity relative to x_{k-1}
    Matrix HbreveGram;  ///< Hbreve * Hbreve^T, reused by every step

    [[nodiscard]] Eigen::Index rows() const { return (N + 1) * q; }
    [[nodiscard]] Eigen::Index input_cols() const { return (N + 1) * m; }
    [[nodiscard]] Eigen::Index noise_cols() const { return (N + 1) * nx; }
};

inline ExtendedSystem build_extended(const DiscreteSystem& sys, int N) {
    sys.validate();
    if (N < 0) throw InvalidParameter("build_extended: window length must be >= 0");

    ExtendedSystem e;
    e.N = N;
    e.sys = sys;
    e.nx = sys.states();
    e.m = sys.inputs();
    e.q = sys.outputs();
    const auto nx = e.nx, m = e.m, q = e.q;
    const Eigen::Index blocks = N + 1;

    // CA[j] = C A^j
    std::vector<Matrix> ca(static_cast<std::size_t>(blocks + 1));
    ca[0] = sys.C;
    for (Eigen::Index j = 1; j <= blocks; ++j) ca[static_cast<std::size_t>(j)] = ca[static_cast<std::size_t>(j - 1)] * sys.Ad;
    auto CA = [&](Eigen::Index j) -> const Matrix& { return ca[static_cast<std::size_t>(j)]; };

    e.Cbar.resize(blocks * q, nx);
    e.Gamma.resize(blocks * q, nx);
    e.Xi.resize(blocks * q, m);
    e.Dbar = Matrix::Zero(blocks * q, blocks * m);
    e.Hbar = Matrix::Zero(blocks * q, blocks * m);
    e.Jbar = Matrix::Zero(blocks * q, blocks * nx);
    e.Fbar = Matrix::Zero(blocks * q, blocks * m);

    const Matrix cb = sys.C * sys.Bd;
    const Matrix cg = sys.C * sys.Gd;

    for (Eigen::Index j = 0; j < blocks; ++j) {
        const Eigen::Index r0 = j * q;
        e.Cbar.middleRows(r0, q) = CA(j);
        e.Gamma.middleRows(r0, q) = CA(j + 1);
        e.Xi.middleRows(r0, q) = (j == 0) ? Matrix(cg + sys.H) : Matrix(CA(j) * sys.Gd);

        for (Eigen::Index i = 0; i <= j; ++i) {
            const Eigen::Index c0 = i * m;
            if (i == j) {
                e.Dbar.block(r0, c0, q, m) = (j == 0) ? sys.D : Matrix(cb + sys.D);
                e.Hbar.block(r0, c0, q, m) = (j == 0) ? sys.H : Matrix(cg + sys.H);
                e.Fbar.block(r0, c0, q, m) = cb + sys.D;
            } else {
                if (i >= 1) {
                    e.Dbar.block(r0, c0, q, m) = CA(j - i) * sys.Bd;
                    e.Hbar.block(r0, c0, q, m) = CA(j - i) * sys.Gd;
                }
                const Matrix g_path = (i + 1 == j) ? Matrix(cg + sys.H) : Matrix(CA(j - i - 1) * sys.Gd);
                e.Fbar.block(r0, c0, q, m) = CA(j - i) * sys.Bd - g_path;
            }
            if (i >= 1) e.Jbar.block(r0, i * nx, q, nx) = CA(j - i);
        }
    }

    e.Hbreve = e.Jbar;
    e.Hbreve.leftCols(nx) = e.Cbar;
    e.HbreveGram = e.Hbreve * e.Hbreve.transpose();
    return e;
}

}  // namespace roadid
