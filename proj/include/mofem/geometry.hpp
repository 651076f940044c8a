#pragma once

// Reference/physical domains for x-normal regions and the cylinder embedding.
//
// A domain is described by a positive profile L(y) on y in [0, 1]. The
// reference rectangle is [x0, x0 + 1] x [0, 1] with x0 = 0 for (plain)
// x-normal domains and x0 = -1/2 for symmetric ones, where L = 2 S.
// The map (x, y) -> (x L(y), y) carries the reference rectangle onto the
// physical domain.

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "mofem/errors.hpp"
#include "mofem/quadrature.hpp"

namespace mofem {

struct ProfileFn {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    std::string name = "custom";
    /// True only for the built-in L == 1; lets assembly skip zero terms cheaply.
    bool is_unit = false;
};

enum class DomainKind { Square, XNormal, SymmetricXNormal };

struct DomainSpec {
    DomainKind kind = DomainKind::Square;
    ProfileFn profile;
    std::string name = "square";

    /// Left end of the reference x-interval.
    double x_origin() const { return kind == DomainKind::SymmetricXNormal ? -0.5 : 0.0; }

    double L(double y) const { return profile.value(y); }
    double dL(double y) const { return profile.derivative(y); }
};

using Point2 = Eigen::Vector2d;

inline ProfileFn unit_profile()
{
    return {[](double) { return 1.0; }, [](double) { return 0.0; }, "unit", true};
}

/// Cap: S(y) = 1 - y^2/2, so L = 2 - y^2.
inline ProfileFn cap_profile()
{
    return {[](double y) { return 2.0 - y * y; }, [](double y) { return -2.0 * y; }, "cap", false};
}

/// Jar: S(y) = 1 + sin(2 pi y)/2, so L = 2 + sin(2 pi y).
inline ProfileFn jar_profile()
{
    constexpr double tau = 2.0 * std::numbers::pi;
    return {[](double y) { return 2.0 + std::sin(tau * y); },
            [](double y) { return tau * std::cos(tau * y); }, "jar", false};
}

/// Checks positivity and derivative consistency at 101 uniform samples.
inline void validate_profile(const ProfileFn& p)
{
    if (!p.value || !p.derivative) throw GeometryError("profile '" + p.name + "' is missing value or derivative");
    constexpr int samples = 101;
    constexpr double h = 1e-5;
    for (int i = 0; i < samples; ++i) {
        const double y = static_cast<double>(i) / (samples - 1);
        const double v = p.value(y);
        if (!(v > 0.0) || !std::isfinite(v))
            throw GeometryError("profile '" + p.name + "' is not positive at y = " + std::to_string(y));
        double fd;
        if (i == 0)
            fd = (-3.0 * p.value(y) + 4.0 * p.value(y + h) - p.value(y + 2 * h)) / (2 * h);
        else if (i == samples - 1)
            fd = (3.0 * p.value(y) - 4.0 * p.value(y - h) + p.value(y - 2 * h)) / (2 * h);
        else
            fd = (p.value(y + h) - p.value(y - h)) / (2 * h);
        const double d = p.derivative(y);
        if (std::abs(d - fd) > 1e-6 * std::max(1.0, std::abs(d)))
            throw GeometryError("profile '" + p.name + "' derivative disagrees with finite differences at y = " +
                                std::to_string(y));
    }
}

inline DomainSpec square_domain() { return {DomainKind::Square, unit_profile(), "square"}; }

inline DomainSpec xnormal_domain(ProfileFn profile, std::string name = "xnormal")
{
    validate_profile(profile);
    return {DomainKind::XNormal, std::move(profile), std::move(name)};
}

inline DomainSpec symmetric_domain(ProfileFn profile, std::string name = "symmetric")
{
    validate_profile(profile);
    return {DomainKind::SymmetricXNormal, std::move(profile), std::move(name)};
}

inline DomainSpec cap_domain() { return symmetric_domain(cap_profile(), "cap"); }
inline DomainSpec jar_domain() { return symmetric_domain(jar_profile(), "jar"); }

namespace detail {
inline std::map<std::string, DomainSpec>& domain_registry()
{
    static std::map<std::string, DomainSpec> reg;
    return reg;
}
inline std::mutex& domain_registry_mutex()
{
    static std::mutex m;
    return m;
}
} // namespace detail

/// Makes a user domain available as "custom:<name>".
inline void register_domain(const std::string& name, DomainSpec spec)
{
    if (spec.kind != DomainKind::Square) validate_profile(spec.profile);
    std::lock_guard lock(detail::domain_registry_mutex());
    detail::domain_registry()[name] = std::move(spec);
}

/// Parses `square | cap | jar | custom:<name>`.
inline DomainSpec domain_from_string(const std::string& s)
{
    if (s == "square") return square_domain();
    if (s == "cap") return cap_domain();
    if (s == "jar") return jar_domain();
    if (s.rfind("custom:", 0) == 0) {
        const std::string key = s.substr(7);
        std::lock_guard lock(detail::domain_registry_mutex());
        auto it = detail::domain_registry().find(key);
        if (it == detail::domain_registry().end()) throw DomainError("unknown custom domain '" + key + "'");
        return it->second;
    }
    throw DomainError("unknown domain '" + s + "'");
}

inline bool in_reference(const DomainSpec& d, const Point2& p, double slack = 1e-12)
{
    const double x0 = d.x_origin();
    return p.x() >= x0 - slack && p.x() <= x0 + 1.0 + slack && p.y() >= -slack && p.y() <= 1.0 + slack;
}

inline Point2 map_to_physical(const DomainSpec& d, const Point2& p)
{
    if (!in_reference(d, p)) throw DomainError("map_to_physical: point outside the reference rectangle");
    return {p.x() * d.L(p.y()), p.y()};
}

inline Point2 map_to_reference(const DomainSpec& d, const Point2& q)
{
    if (q.y() < -1e-12 || q.y() > 1.0 + 1e-12) throw DomainError("map_to_reference: y outside [0, 1]");
    const double L = d.L(q.y());
    if (!(L > 0.0)) throw GeometryError("map_to_reference: non-positive profile");
    Point2 p{q.x() / L, q.y()};
    if (!in_reference(d, p)) throw DomainError("map_to_reference: point outside the physical domain");
    return p;
}

/// Transformed diffusion tensor H * det(J) pulled back to the reference rectangle.
inline Eigen::Matrix2d hhat(const DomainSpec& d, const Point2& p)
{
    if (!in_reference(d, p)) throw DomainError("hhat: point outside the reference rectangle");
    const double L = d.L(p.y());
    if (!(L > 0.0)) throw GeometryError("hhat: non-positive profile at y = " + std::to_string(p.y()));
    const double dL = d.dL(p.y());
    const double x = p.x();
    Eigen::Matrix2d H;
    H(0, 0) = 1.0 / L + x * x * dL * dL / L;
    H(0, 1) = H(1, 0) = -x * dL;
    H(1, 1) = L;
    return H;
}

inline Eigen::Vector3d wrap_to_cylinder(const Point2& p)
{
    if (p.y() < -1e-12 || p.y() > 1.0 + 1e-12) throw DomainError("wrap_to_cylinder: y outside [0, 1]");
    constexpr double tau = 2.0 * std::numbers::pi;
    return {p.x(), std::sin(tau * p.y()) / tau, std::cos(tau * p.y()) / tau};
}

/// Area of the physical domain, integral of L over [0, 1].
inline double domain_area(const DomainSpec& d)
{
    if (d.profile.is_unit) return 1.0;
    const auto rule = gauss_legendre(8);
    constexpr int panels = 64;
    double area = 0.0;
    for (int e = 0; e < panels; ++e)
        for (std::size_t q = 0; q < rule.size(); ++q)
            area += rule.weights[q] / panels * d.L((e + rule.points[q]) / panels);
    return area;
}

inline double effective_domain_size(const DomainSpec& d, double rho) { return rho * domain_area(d); }

} // namespace mofem
