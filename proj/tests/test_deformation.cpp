#include "doctest.h"

#include <cmath>
#include <set>

#include "brainid/corruption.hpp"
#include "brainid/deformation.hpp"
#include "brainid/error.hpp"
#include "brainid/metrics.hpp"
#include "brainid/phantom.hpp"
#include "support.hpp"

using namespace brainid;
using testing_support::composition_residual;
using testing_support::from_function;

namespace {

double max_abs_diff(const DeformationField& a, const DeformationField& b)
{
    double m = 0.0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < a.displacement()[c].size(); ++i)
            m = std::max(m, std::abs(a.displacement()[c][i] - b.displacement()[c][i]));
    return m;
}

DeformationField mild_field(std::uint64_t seed, const Geometry& g)
{
    Rng rng(seed);
    return generate_deformation(rng, SeverityConfig::preset(Level::Mild).deformation, g, seed);
}

} // namespace

TEST_CASE("sample_affine")
{
    SUBCASE("all ranges zero gives the identity")
    {
        Rng rng(1);
        CHECK(sample_affine(rng, DeformationConfig::none()).is_identity());
    }
    SUBCASE("angles stay inside the rotation range over 10^4 draws")
    {
        Rng rng(2);
        const DeformationConfig cfg;
        double lo = 0, hi = 0;
        for (int t = 0; t < 10000; ++t) {
            const AffineParams a = sample_affine(rng, cfg);
            for (double r : a.rotation_deg) {
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
            for (double s : a.scaling)
                CHECK((s >= 0.8 && s <= 1.2));
            for (double h : a.shearing)
                CHECK(std::abs(h) <= 0.2);
        }
        CHECK(lo >= -15.0);
        CHECK(hi <= 15.0);
        CHECK(lo < -14.0);
        CHECK(hi > 14.0);
    }
    SUBCASE("fixed seed is deterministic")
    {
        Rng a(42), b(42);
        const AffineParams pa = sample_affine(a, {});
        const AffineParams pb = sample_affine(b, {});
        CHECK(pa.rotation_deg == pb.rotation_deg);
        CHECK(pa.scaling == pb.scaling);
        CHECK(pa.shearing == pb.shearing);
    }
}

TEST_CASE("affine matrix fixes the centre and scales about it")
{
    AffineParams a;
    a.scaling = {2.0, 2.0, 2.0};
    const Vec3 c(10, 20, 30);
    const Mat4 m = a.matrix(c);
    const Eigen::Vector4d at_c = m * Eigen::Vector4d(10, 20, 30, 1);
    CHECK((at_c.head<3>() - c).norm() < 1e-12);
    const Eigen::Vector4d p = m * Eigen::Vector4d(11, 20, 30, 1);
    CHECK(p[0] == doctest::Approx(12.0));

    AffineParams r;
    r.rotation_deg = {0, 0, 90};
    const Eigen::Vector4d q = r.matrix(Vec3::Zero()) * Eigen::Vector4d(1, 0, 0, 1);
    CHECK(std::abs(q[0]) < 1e-12);
    CHECK(q[1] == doctest::Approx(1.0));
}

TEST_CASE("integrate_svf")
{
    const Geometry g = Geometry::isotropic({32, 32, 32});
    SUBCASE("zero velocity gives exactly the identity")
    {
        const DeformationField f = integrate_svf(SVF::zero(g), 7);
        for (int c = 0; c < 3; ++c)
            for (double v : f.displacement()[c].data())
                CHECK(v == 0.0);
    }
    SUBCASE("constant velocity integrates to a translation")
    {
        const Vec3 c(1.5, -2.0, 0.75);
        const DeformationField f = integrate_svf(SVF::constant(g, c), 7);
        double worst = 0.0;
        for (int k = 4; k < 28; ++k)
            for (int j = 4; j < 28; ++j)
                for (int i = 4; i < 28; ++i)
                    worst = std::max(worst, (f.displacement_at(g.index(i, j, k)) - c).norm());
        CHECK(worst <= 1e-4 * c.norm());
    }
    SUBCASE("exp(v) composed with exp(-v) is close to the identity")
    {
        Rng rng(5);
        DeformationConfig cfg = DeformationConfig::none();
        cfg.svf_scale_min = 0.02;
        cfg.svf_scale_max = 0.03;
        const SVF v = sample_svf(rng, cfg, g);
        const DeformationField fwd = integrate_svf(v, 7);
        const DeformationField bwd = integrate_svf(v.negated(), 7);
        const auto r = composition_residual(fwd, bwd, 4);
        CHECK(r.count > 1000);
        CHECK(r.max <= 0.5);
    }
}

TEST_CASE("compose")
{
    const Geometry g = Geometry::isotropic({16, 16, 16}, 1.5);
    SUBCASE("identity after phi is phi")
    {
        const DeformationField phi = mild_field(3, g);
        CHECK(max_abs_diff(compose(DeformationField::identity(g), phi), phi) <= 1e-6);
    }
    SUBCASE("translations add")
    {
        const Vec3 t1(1, 2, -1), t2(0.5, -0.25, 2);
        const DeformationField sum = compose(DeformationField::translation(g, t1), DeformationField::translation(g, t2));
        CHECK(max_abs_diff(sum, DeformationField::translation(g, t1 + t2)) <= 1e-12);
    }
    SUBCASE("associative on translations")
    {
        const auto a = DeformationField::translation(g, {1, 0, 0});
        const auto b = DeformationField::translation(g, {0, 2, 0});
        const auto c = DeformationField::translation(g, {0, 0, -3});
        CHECK(max_abs_diff(compose(compose(a, b), c), compose(a, compose(b, c))) <= 1e-6);
    }
    SUBCASE("scale 2 then translate 1 mm matches the analytic map")
    {
        AffineParams scale;
        scale.scaling = {2, 2, 2};
        const Vec3 t(1, 0, 0);
        const DeformationField phi = compose(DeformationField::translation(g, t), scale);
        const Vec3 centre = g.center_mm();
        for (auto [i, j, k] : std::vector<std::array<int, 3>>{{0, 0, 0}, {3, 7, 11}, {15, 15, 15}, {8, 2, 9}}) {
            const Vec3 p = g.physical(Vec3(i, j, k));
            const Vec3 expected = 2.0 * (p - centre) + centre + t;
            const Vec3 got = p + phi.displacement_at(g.index(i, j, k));
            CHECK((got - expected).norm() <= 1e-5);
        }
    }
}

TEST_CASE("invert")
{
    const Geometry g = Geometry::isotropic({32, 32, 32});
    SUBCASE("identity")
    {
        CHECK(max_abs_diff(invert(DeformationField::identity(g)), DeformationField::identity(g)) == 0.0);
    }
    SUBCASE("translation")
    {
        const Vec3 t(2.0, -1.0, 0.5);
        CHECK(max_abs_diff(invert(DeformationField::translation(g, t)), DeformationField::translation(g, -t)) <= 1e-6);
    }
    SUBCASE("generated mild deformation")
    {
        const DeformationField phi = mild_field(11, g);
        const DeformationField inv = invert(phi);
        CHECK(inv.provenance().kind == ProvenanceKind::Inverse);
        const auto r = composition_residual(phi, inv, 4);
        CHECK(r.count > 1000);
        CHECK(r.mean <= 0.2);

        const DeformationField back = invert(inv);
        double sum = 0.0;
        std::size_t n = 0;
        for (int k = 4; k < 28; ++k)
            for (int j = 4; j < 28; ++j)
                for (int i = 4; i < 28; ++i, ++n) {
                    const std::size_t idx = g.index(i, j, k);
                    sum += (back.displacement_at(idx) - phi.displacement_at(idx)).norm();
                }
        CHECK(sum / n <= 0.3);
    }
    SUBCASE("fixed-point inversion of a smooth field without provenance")
    {
        const DeformationField phi = mild_field(12, g);
        const DeformationField plain(phi.displacement());
        const DeformationField inv = invert(plain);
        const auto r = composition_residual(plain, inv, 4);
        CHECK(r.mean <= 0.2);
    }
    SUBCASE("folding field is not invertible")
    {
        // Large high-frequency displacement: phi folds repeatedly along x.
        const VolumeStack u({from_function(g, [](int i, int, int) { return 6.0 * std::sin(1.3 * i); }), Volume(g),
                             Volume(g)});
        CHECK_THROWS_AS(invert(DeformationField(u)), Error);
    }
}

TEST_CASE("warp_volume and warp_labels")
{
    const Geometry g = Geometry::isotropic({12, 10, 8});
    SUBCASE("identity field leaves input unchanged")
    {
        const Volume v = testing_support::random_volume(g, 1);
        const Volume w = warp_volume(v, DeformationField::identity(g));
        for (std::size_t i = 0; i < v.size(); ++i)
            CHECK(w[i] == v[i]);
    }
    SUBCASE("one-voxel translation shifts a ramp")
    {
        const Volume ramp = from_function(g, [](int i, int, int) { return double(i); });
        const Volume w = warp_volume(ramp, DeformationField::translation(g, {1, 0, 0}));
        for (int k = 0; k < 8; ++k)
            for (int j = 0; j < 10; ++j)
                for (int i = 0; i < 11; ++i)
                    CHECK(w.at(i, j, k) == doctest::Approx(i + 1.0));
        CHECK(w.at(11, 0, 0) == 0.0); // sampled off-grid
    }
    SUBCASE("geometry mismatch")
    {
        const Volume v(Geometry::isotropic({12, 10, 9}));
        try {
            warp_volume(v, DeformationField::identity(g));
            FAIL("expected GeometryMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::GeometryMismatch);
        }
    }
    SUBCASE("warped labels stay inside the input label set")
    {
        const SubjectRecord s = make_phantom(4, {32, 32, 32});
        const LabelMap w = warp_labels(s.labels, mild_field(8, s.labels.geometry()));
        std::set<std::int32_t> allowed(s.labels.label_set().begin(), s.labels.label_set().end());
        allowed.insert(0);
        for (std::int32_t l : w.label_set())
            CHECK(allowed.count(l) == 1);
    }
}

TEST_CASE("warp then warp by the inverse recovers the image")
{
    const SubjectRecord s = make_phantom(9, {48, 48, 48});
    const DeformationField phi = mild_field(21, s.labels.geometry());
    const Volume recovered = warp_volume(warp_volume(s.mprage, phi), invert(phi));
    const auto mask = eroded_foreground(s.labels, 2);
    CHECK(ssim(s.mprage, recovered, {}, mask) >= 0.95);
}

TEST_CASE("realize reproduces a generated field from its provenance")
{
    const Geometry g = Geometry::isotropic({24, 24, 24});
    const DeformationField phi = mild_field(31, g);
    REQUIRE(phi.provenance().source.has_value());
    const DeformationField again = realize(*phi.provenance().source, g, phi.id());
    CHECK(max_abs_diff(phi, again) == 0.0);
}
