#include "watermap/dataset.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>
#include <string>

#include "watermap/errors.hpp"
#include "watermap/io.hpp"
#include "watermap/rng.hpp"

namespace watermap {

namespace {

void check_finite(const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (!std::isfinite(m(i, j)))
                throw ParseError("non-finite entry at (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
}

} // namespace

DataSource make_coordinates(Matrix values) {
    if (values.rows() < 2 || values.cols() < 1)
        throw ShapeError("coordinates need at least 2 rows and 1 column");
    check_finite(values);
    return {SourceKind::Coordinates, std::move(values)};
}

DataSource make_distances(Matrix values) {
    if (values.rows() != values.cols())
        throw ShapeError("distance matrix must be square, got " +
                         std::to_string(values.rows()) + "x" +
                         std::to_string(values.cols()));
    if (values.rows() < 2) throw ShapeError("distance matrix needs n >= 2");
    check_finite(values);
    const std::size_t n = values.rows();
    for (std::size_t i = 0; i < n; ++i) {
        if (values(i, i) != 0.0)
            throw AsymmetryError("nonzero diagonal at (" + std::to_string(i) + "," +
                                 std::to_string(i) + ")");
        for (std::size_t j = i + 1; j < n; ++j) {
            double a = values(i, j);
            double b = values(j, i);
            if (a < 0.0 || b < 0.0)
                throw AsymmetryError("negative distance at (" + std::to_string(i) +
                                     "," + std::to_string(j) + ")");
            double scale = std::max(std::abs(a), std::abs(b));
            if (std::abs(a - b) > 1e-9 * scale)
                throw AsymmetryError("asymmetric entries at (" + std::to_string(i) +
                                     "," + std::to_string(j) + "): " +
                                     io::format_double(a) + " vs " +
                                     io::format_double(b));
            values(j, i) = a; // canonicalize so downstream access is exact
        }
    }
    return {SourceKind::PrecomputedDistances, std::move(values)};
}

DataSource load_matrix(const std::string& path, FileFormat format,
                       bool as_distances, bool header) {
    Matrix m = (format == FileFormat::Csv) ? io::read_csv_matrix(path, header)
                                           : io::read_rawbin_matrix(path);
    return as_distances ? make_distances(std::move(m))
                        : make_coordinates(std::move(m));
}

double pairwise_distance2(const DataSource& src, std::size_t i, std::size_t j) {
    const std::size_t n = src.n();
    if (i >= n || j >= n)
        throw IndexError("index out of range: " + std::to_string(i) + "," +
                         std::to_string(j) + " for n=" + std::to_string(n));
    if (i == j) throw IndexError("self-distance is excluded");
    if (src.kind == SourceKind::PrecomputedDistances) {
        double d = src.values(i, j);
        return d * d;
    }
    double s = 0.0;
    const double* a = src.values.row(i);
    const double* b = src.values.row(j);
    for (std::size_t k = 0; k < src.values.cols(); ++k) {
        double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

DataSource whiten(const DataSource& src, std::size_t keep_dims) {
    if (src.kind != SourceKind::Coordinates)
        throw ConfigError("whiten requires coordinate data");
    const std::size_t n = src.n();
    const std::size_t m = src.values.cols();
    if (keep_dims < 1 || keep_dims > m)
        throw ConfigError("keep_dims must be in [1, " + std::to_string(m) + "]");
    if (n < 2) throw ShapeError("whiten needs n >= 2");

    using Mat =
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> x(src.values.data(), static_cast<Eigen::Index>(n),
                            static_cast<Eigen::Index>(m));
    Eigen::RowVectorXd mean = x.colwise().mean();
    Mat centered = x.rowwise() - mean;
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw RankError("eigendecomposition failed");
    // Ascending eigenvalues; keep the top keep_dims, largest first.
    Eigen::VectorXd evals = eig.eigenvalues();
    Eigen::MatrixXd evecs = eig.eigenvectors();
    double emax = std::max(evals(static_cast<Eigen::Index>(m) - 1), 0.0);
    double floor = std::max(emax, 1.0) * 1e-10;

    Matrix out(n, keep_dims);
    for (std::size_t c = 0; c < keep_dims; ++c) {
        Eigen::Index k = static_cast<Eigen::Index>(m - 1 - c);
        double lambda = evals(k);
        if (lambda <= floor)
            throw RankError("fewer than " + std::to_string(keep_dims) +
                            " nonzero-variance directions");
        Eigen::VectorXd v = evecs.col(k);
        // Deterministic sign: largest-magnitude coefficient is positive.
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        Eigen::VectorXd proj = centered * (v / std::sqrt(lambda));
        for (std::size_t i = 0; i < n; ++i) out(i, c) = proj(static_cast<Eigen::Index>(i));
    }
    return {SourceKind::Coordinates, std::move(out)};
}

std::pair<DataSource, std::vector<int>> generate_gmm(const GmmSpec& spec) {
    if (spec.components < 1) throw ConfigError("components must be >= 1");
    if (spec.dims < 1) throw ConfigError("dims must be >= 1");
    if (spec.n < spec.components)
        throw ConfigError("n must be >= components");
    if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation))
        throw ConfigError("separation must be finite and >= 0");

    Rng rng(spec.seed);
    double side = spec.separation *
                  std::pow(static_cast<double>(spec.components),
                           1.0 / static_cast<double>(spec.dims));
    Matrix means(spec.components, spec.dims);
    for (std::size_t c = 0; c < spec.components; ++c)
        for (std::size_t d = 0; d < spec.dims; ++d)
            means(c, d) = (rng.uniform() - 0.5) * side;

    Matrix data(spec.n, spec.dims);
    std::vector<int> labels(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        std::size_t c = static_cast<std::size_t>(rng.below(spec.components));
        labels[i] = static_cast<int>(c);
        for (std::size_t d = 0; d < spec.dims; ++d)
            data(i, d) = means(c, d) + rng.normal();
    }
    return {DataSource{SourceKind::Coordinates, std::move(data)}, std::move(labels)};
}

} // namespace watermap
