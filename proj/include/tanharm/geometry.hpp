#pragma once

// Closed-form geometric operators on the unit ball: cylindrical coordinates,
// frames, sphere inversion, the radial reflection matrix, the inversion
// extension of a director field, and boundary charts that flatten the sphere
// near a base point.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace tanharm {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm2() const { return dot(*this); }
    double norm() const { return std::sqrt(norm2()); }
    double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline Vec3 normalized(const Vec3& v) {
    double n = v.norm();
    if (n < 1e-300) throw std::domain_error("normalized: zero vector");
    return v / n;
}

// Unit-norm director value; construction enforces | |v|-1 | <= 1e-12.
class UnitVec3 {
  public:
    explicit UnitVec3(const Vec3& v) : v_(v) {
        if (std::abs(v.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("UnitVec3: |v| deviates from 1 beyond 1e-12");
    }
    UnitVec3(double x, double y, double z) : UnitVec3(Vec3{x, y, z}) {}
    const Vec3& vec() const { return v_; }
    operator const Vec3&() const { return v_; }
    double x() const { return v_.x; }
    double y() const { return v_.y; }
    double z() const { return v_.z; }

  private:
    Vec3 v_;
};

// Row-major 3x3 matrix.
struct Mat3 {
    std::array<double, 9> a{};

    static Mat3 identity() {
        Mat3 m;
        m.a = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return m;
    }
    static Mat3 outer(const Vec3& u, const Vec3& v) {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = u[i] * v[j];
        return m;
    }

    double& operator()(int i, int j) { return a[size_t(3 * i + j)]; }
    double operator()(int i, int j) const { return a[size_t(3 * i + j)]; }

    Mat3 operator+(const Mat3& o) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[size_t(i)] = a[size_t(i)] + o.a[size_t(i)];
        return m;
    }
    Mat3 operator-(const Mat3& o) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[size_t(i)] = a[size_t(i)] - o.a[size_t(i)];
        return m;
    }
    Mat3 operator*(double s) const {
        Mat3 m;
        for (int i = 0; i < 9; ++i) m.a[size_t(i)] = a[size_t(i)] * s;
        return m;
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                m(i, j) = s;
            }
        return m;
    }
    Vec3 operator*(const Vec3& v) const {
        return {a[0] * v.x + a[1] * v.y + a[2] * v.z,
                a[3] * v.x + a[4] * v.y + a[5] * v.z,
                a[6] * v.x + a[7] * v.y + a[8] * v.z};
    }
    Mat3 transposed() const {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = (*this)(j, i);
        return m;
    }
    double frobenius2() const {
        double s = 0;
        for (double v : a) s += v * v;
        return s;
    }
    double det() const {
        return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
               a[2] * (a[3] * a[7] - a[4] * a[6]);
    }
    double max_abs() const {
        double s = 0;
        for (double v : a) s = std::max(s, std::abs(v));
        return s;
    }
};

inline Mat3 operator*(double s, const Mat3& m) { return m * s; }

// Cylindrical coordinates; on_axis marks rho=0 where theta is not defined
// (theta is then reported as 0 and must not be trusted downstream).
struct CylCoords {
    double rho = 0.0;
    double theta = 0.0;
    double z = 0.0;
    bool on_axis = false;
};

// theta follows the two-argument arctangent mapped into [0, 2pi).
inline CylCoords to_cylindrical(const Vec3& p) {
    CylCoords c;
    c.rho = std::hypot(p.x, p.y);
    c.z = p.z;
    if (c.rho < 1e-15) {
        c.on_axis = true;
        c.theta = 0.0;
        c.rho = std::max(c.rho, 0.0);
        return c;
    }
    c.theta = std::atan2(p.y, p.x);
    if (c.theta < 0.0) c.theta += kTwoPi;
    if (c.theta >= kTwoPi) c.theta = 0.0;
    return c;
}

inline Vec3 from_cylindrical(const CylCoords& c) {
    return {c.rho * std::cos(c.theta), c.rho * std::sin(c.theta), c.z};
}

struct Frame {
    UnitVec3 e_rho;
    UnitVec3 e_theta;
    UnitVec3 e_z;
};

inline Frame frame_at(double theta) {
    double ct = std::cos(theta), st = std::sin(theta);
    return {UnitVec3(ct, st, 0.0), UnitVec3(-st, ct, 0.0), UnitVec3(0.0, 0.0, 1.0)};
}

// Inversion about the unit sphere, x -> x/|x|^2.
inline Vec3 inversion(const Vec3& x) {
    double n2 = x.norm2();
    if (n2 < 1e-24) throw std::domain_error("inversion: |x| below 1e-12");
    return x / n2;
}

// A(x) = I - 2 x x^T / |x|^2, the orthogonal reflection flipping the radial
// component. Symmetric involution with |A|^2 = 3.
inline Mat3 reflection_matrix(const Vec3& x) {
    double n2 = x.norm2();
    if (n2 < 1e-24) throw std::domain_error("reflection_matrix: |x| below 1e-12");
    return Mat3::identity() - Mat3::outer(x, x) * (2.0 / n2);
}

// d/dx_i of A(x) = -(2/|x|^2)[e_i x^T + x e_i^T] + (4 x_i/|x|^4) x x^T.
inline Mat3 reflection_matrix_partial(const Vec3& x, int i) {
    if (i < 0 || i > 2) throw std::invalid_argument("reflection_matrix_partial: axis index");
    double n2 = x.norm2();
    if (n2 < 1e-24) throw std::domain_error("reflection_matrix_partial: |x| below 1e-12");
    Vec3 ei{i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0, i == 2 ? 1.0 : 0.0};
    return (Mat3::outer(ei, x) + Mat3::outer(x, ei)) * (-2.0 / n2) +
           Mat3::outer(x, x) * (4.0 * x[i] / (n2 * n2));
}

// Value of the inversion extension u_bar(x) = A(x) u(iota(x)) on the annulus.
inline UnitVec3 extend_field_value(const std::function<Vec3(const Vec3&)>& u_at, const Vec3& x) {
    double r = x.norm();
    if (r <= 1.0)
        throw std::domain_error("extend_field_value: |x| <= 1, evaluate u directly");
    if (r > 2.0) throw std::domain_error("extend_field_value: |x| > 2");
    Vec3 v = reflection_matrix(x) * u_at(inversion(x));
    return UnitVec3(normalized(v));
}

// Smallest-angle rotation taking e3 to b (unit); for b = -e3 the rotation is
// by pi about e1.
inline Mat3 rotation_e3_to(const Vec3& b) {
    Vec3 e3{0, 0, 1};
    double c = e3.dot(b);
    Vec3 a = e3.cross(b);
    double s2 = a.norm2();
    if (s2 < 1e-28) {
        if (c > 0.0) return Mat3::identity();
        Mat3 m = Mat3::identity();
        m(1, 1) = -1.0;
        m(2, 2) = -1.0;
        return m;
    }
    Mat3 ax;  // [a]_x
    ax(0, 1) = -a.z; ax(0, 2) = a.y;
    ax(1, 0) = a.z;  ax(1, 2) = -a.x;
    ax(2, 0) = -a.y; ax(2, 1) = a.x;
    return Mat3::identity() + ax + (ax * ax) * ((1.0 - c) / s2);
}

// Chart around x0 on the sphere: the north-pole chart
//   Phi(y) = (1 + y3) * (y1, y2, sqrt(1 - y1^2 - y2^2))
// conjugated by the rotation taking e3 to x0. {y3 < 0} maps into the ball,
// {y3 = 0} onto the sphere.
class BoundaryChart {
  public:
    BoundaryChart(const UnitVec3& base_point, double chart_radius)
        : x0_(base_point), r0_(chart_radius), rot_(rotation_e3_to(base_point.vec())) {
        if (!(chart_radius > 0.0 && chart_radius < 0.25))
            throw std::invalid_argument("BoundaryChart: radius must lie in (0, 1/4)");
        rot_t_ = rot_.transposed();
    }

    const Vec3& base_point() const { return x0_.vec(); }
    double radius() const { return r0_; }
    const Mat3& rotation() const { return rot_; }

    Vec3 forward(const Vec3& y) const {
        require_in_ball(y, "chart forward");
        double s = 1.0 - y.x * y.x - y.y * y.y;
        Vec3 phi{y.x, y.y, std::sqrt(s)};
        return rot_ * (phi * (1.0 + y.z));
    }

    Vec3 inverse(const Vec3& x) const {
        Vec3 q = rot_t_ * x;
        double r = q.norm();
        if (r < 1e-12) throw std::domain_error("chart inverse: |x| ~ 0");
        Vec3 y{q.x / r, q.y / r, r - 1.0};
        if (y.norm() >= r0_) throw std::domain_error("chart inverse: point outside chart domain");
        return y;
    }

    // grad Phi(y), columns d/dy_j, pre-rotated.
    Mat3 grad_forward(const Vec3& y) const {
        require_in_ball(y, "chart grad_forward");
        double s = std::sqrt(1.0 - y.x * y.x - y.y * y.y);
        Mat3 g;
        g(0, 0) = 1.0 + y.z; g(0, 1) = 0.0;        g(0, 2) = y.x;
        g(1, 0) = 0.0;        g(1, 1) = 1.0 + y.z; g(1, 2) = y.y;
        g(2, 0) = -y.x * (1.0 + y.z) / s;
        g(2, 1) = -y.y * (1.0 + y.z) / s;
        g(2, 2) = s;
        return rot_ * g;
    }

    // grad Phi^{-1}(x) = (1/|x|) I + (1/|x|^3)[x3 e3 - x] x^T + (1/|x|) e3 [x - e3]^T
    // in north-pole coordinates, conjugated back.
    Mat3 grad_inverse(const Vec3& x) const {
        Vec3 q = rot_t_ * x;
        double r = q.norm();
        if (r < 1e-12) throw std::domain_error("chart grad_inverse: |x| ~ 0");
        Vec3 e3{0, 0, 1};
        Mat3 g = Mat3::identity() * (1.0 / r) +
                 Mat3::outer(e3 * q.z - q, q) * (1.0 / (r * r * r)) +
                 Mat3::outer(e3, q - e3) * (1.0 / r);
        return g * rot_t_;
    }

    // grad Phi evaluated at Phi^{-1}(x); inverse of grad_inverse by the chain rule.
    Mat3 grad_forward_at(const Vec3& x) const { return grad_forward(inverse(x)); }

  private:
    void require_in_ball(const Vec3& y, const char* who) const {
        if (y.norm() >= r0_)
            throw std::domain_error(std::string(who) + ": argument outside chart ball");
    }

    UnitVec3 x0_;
    double r0_;
    Mat3 rot_;
    Mat3 rot_t_;
};

}  // namespace tanharm
