#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "temperfield/fields.hpp"
#include "temperfield/simulate.hpp"

namespace tf {

/// Malformed or out-of-schema input; what() starts with "file:line: ".
class SchemaError : public std::runtime_error {
public:
    SchemaError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
    int line;
};

enum class SimTarget { path, tas, integral };

/// Integrand for quasi-norm, membership and integral sampling: either the
/// field kernel at a point or a simple function.
struct IntegrandSpec {
    std::optional<Vec> kernel_at;
    std::vector<SimplePiece> pieces;
    /// Multiplies the integrand.
    double scale = 1.0;
};

struct SimSection {
    SimConfig config;
    SimTarget target = SimTarget::path;
    /// Levy mass for the tas target.
    double mass = 1.0;
    std::vector<Vec> grid;
};

/// Everything a run can read from one spec file. Only alpha, lambda and sigma
/// are mandatory; the field block (n, d, E, D, kind, phi, beta) must be given
/// completely or not at all.
struct SpecDocument {
    std::string source;
    StableParams params;
    SpectralMeasure sigma;
    std::optional<FieldSpec> field;
    std::optional<FddQuery> query;
    std::optional<IntegrandSpec> integrand;
    SimSection sim;
    QuadratureConfig quad;
    bool quad_box_radius_set = false;
    std::vector<std::string> warnings;
    /// Compact dump of the parsed document, for hashing.
    std::string canonical;
};

SpecDocument parse_spec(std::string_view text, const std::string& source = "<spec>");
SpecDocument load_spec(const std::string& path);

/// The integrand described by doc.integrand (requires the field block for kernel_at).
IntegrandFn make_integrand(const SpecDocument& doc);

}  // namespace tf
