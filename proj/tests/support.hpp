// Helpers shared by the unit and acceptance tests: random inputs and brute-force oracles
// written independently of the library's fast paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "brainid/deformation.hpp"
#include "brainid/volume.hpp"

namespace testing_support {

using brainid::Geometry;
using brainid::Volume;

inline Volume random_volume(const Geometry& g, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Volume v(g);
    for (auto& x : v.data())
        x = u(rng);
    return v;
}

inline Volume from_function(const Geometry& g, auto&& f)
{
    Volume v(g);
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i)
                v.at(i, j, k) = f(i, j, k);
    return v;
}

// Direct sliding-window SSIM: every statistic recomputed from the raw window voxels.
inline double brute_force_ssim(const Volume& a, const Volume& b, int w = 7, double k1 = 0.01, double k2 = 0.03,
                               double range = 1.0, bool contrast_structure_only = false)
{
    const auto& d = a.dims();
    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);
    double total = 0.0;
    int centres = 0;
    for (int z0 = 0; z0 + w <= d[2]; ++z0)
        for (int y0 = 0; y0 + w <= d[1]; ++y0)
            for (int x0 = 0; x0 + w <= d[0]; ++x0) {
                std::vector<double> va, vb;
                for (int z = z0; z < z0 + w; ++z)
                    for (int y = y0; y < y0 + w; ++y)
                        for (int x = x0; x < x0 + w; ++x) {
                            va.push_back(a.at(x, y, z));
                            vb.push_back(b.at(x, y, z));
                        }
                const double n = static_cast<double>(va.size());
                double ma = 0, mb = 0;
                for (std::size_t i = 0; i < va.size(); ++i) {
                    ma += va[i];
                    mb += vb[i];
                }
                ma /= n;
                mb /= n;
                double sa = 0, sb = 0, sab = 0;
                for (std::size_t i = 0; i < va.size(); ++i) {
                    sa += (va[i] - ma) * (va[i] - ma);
                    sb += (vb[i] - mb) * (vb[i] - mb);
                    sab += (va[i] - ma) * (vb[i] - mb);
                }
                sa /= n;
                sb /= n;
                sab /= n;
                const double cs = (2 * sab + c2) / (sa + sb + c2);
                const double lum = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                total += contrast_structure_only ? cs : lum * cs;
                ++centres;
            }
    return total / centres;
}

struct ResidualStats {
    double mean = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

// |phi(psi(p)) - p| in voxels over grid points at least `margin` voxels from every face whose
// intermediate point psi(p) still lies inside the grid. phi is evaluated by an independent
// trilinear interpolation of its displacement samples.
inline ResidualStats composition_residual(const brainid::DeformationField& phi, const brainid::DeformationField& psi,
                                          int margin)
{
    const Geometry& g = phi.geometry();
    auto phi_at = [&](const brainid::Vec3& phys) {
        brainid::Vec3 out = phys;
        double x[3];
        int i0[3];
        double f[3];
        for (int a = 0; a < 3; ++a) {
            x[a] = phys[a] / g.spacing[a];
            i0[a] = std::min(std::max(static_cast<int>(std::floor(x[a])), 0), g.dims[a] - 2);
            f[a] = x[a] - i0[a];
        }
        for (int c = 0; c < 3; ++c) {
            const Volume& u = phi.displacement()[c];
            double acc = 0.0;
            for (int dz = 0; dz < 2; ++dz)
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) * (dz ? f[2] : 1 - f[2]);
                        acc += w * u.at(i0[0] + dx, i0[1] + dy, i0[2] + dz);
                    }
            out[c] += acc;
        }
        return out;
    };
    ResidualStats s;
    double sum = 0.0;
    for (int k = margin; k < g.dims[2] - margin; ++k)
        for (int j = margin; j < g.dims[1] - margin; ++j)
            for (int i = margin; i < g.dims[0] - margin; ++i) {
                const std::size_t idx = g.index(i, j, k);
                const brainid::Vec3 p = g.physical(brainid::Vec3(i, j, k));
                const brainid::Vec3 q = p + psi.displacement_at(idx);
                bool inside = true;
                for (int a = 0; a < 3; ++a)
                    inside = inside && q[a] >= 0.0 && q[a] <= (g.dims[a] - 1) * g.spacing[a];
                if (!inside)
                    continue;
                const brainid::Vec3 r = g.to_voxel(phi_at(q) - p);
                const double e = r.norm();
                sum += e;
                s.max = std::max(s.max, e);
                ++s.count;
            }
    s.mean = s.count ? sum / static_cast<double>(s.count) : 0.0;
    return s;
}

} // namespace testing_support
