#include "qbroad/propagator.hpp"

#include <cmath>
#include <stdexcept>

namespace qbroad {

namespace {

struct StrangTables {
    std::shared_ptr<const SpectralTransform> transform;
    std::vector<cdouble> kinetic_half; // e^{-i tau |k|^2 / 2}
    std::vector<cdouble> potential;    // e^{-i tau eps V(x)}

    StrangTables(const Grid& grid, const PotentialField& pot,
                 const EvolveConfig& cfg)
        : transform(spectral_transform(grid)) {
        // single steps may run backwards (time reversal); evolve() enforces
        // tau > 0 for production runs
        if (cfg.tau == 0.0)
            throw std::invalid_argument("strang_step: tau must be nonzero");
        if (pot.values.size() != grid.size())
            throw std::invalid_argument("strang_step: potential size mismatch");
        kinetic_half.resize(grid.size());
        potential.resize(grid.size());
        // K(k) = |k|^2/2, applied as half steps e^{-i (tau/2) K}
        for (std::size_t i = 0; i < grid.size(); ++i)
            kinetic_half[i] = std::polar(1.0, -0.25 * cfg.tau * grid.ksq()[i]);
        for (std::size_t i = 0; i < grid.size(); ++i)
            potential[i] = std::polar(1.0, -cfg.tau * cfg.epsilon * pot.values[i]);
    }

    void step(WaveField& field, double tau) const {
        auto& a = field.amplitudes;
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= kinetic_half[i];
        transform->inverse(a);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= potential[i];
        transform->forward(a);
        for (std::size_t i = 0; i < a.size(); ++i) a[i] *= kinetic_half[i];
        field.time += tau;
    }
};

void require_momentum(const WaveField& field, const char* who) {
    if (field.rep != Representation::momentum)
        throw std::invalid_argument(std::string(who) +
                                    ": field must be in momentum representation");
}

} // namespace

WaveField init_plane_wave(const Grid& grid, const std::array<int, 2>& kp) {
    if (!grid.on_lattice(kp[0], kp[1]))
        throw std::out_of_range("init_plane_wave: kp off lattice");
    WaveField field;
    field.rep = Representation::momentum;
    field.amplitudes.assign(grid.size(), cdouble(0.0, 0.0));
    field.amplitudes[grid.at_wavevector(kp[0], kp[1])] = cdouble(grid.n(), 0.0);
    return field;
}

double norm(const Grid& grid, const WaveField& field) {
    double s = 0.0;
    for (const auto& a : field.amplitudes) s += std::norm(a);
    const double n = std::sqrt(s);
    return field.rep == Representation::momentum ? n / grid.n() : n;
}

void to_position(const Grid& grid, WaveField& field) {
    require_momentum(field, "to_position");
    spectral_transform(grid)->inverse(field.amplitudes);
    field.rep = Representation::position;
}

void to_momentum(const Grid& grid, WaveField& field) {
    if (field.rep != Representation::position)
        throw std::invalid_argument("to_momentum: field must be in position representation");
    spectral_transform(grid)->forward(field.amplitudes);
    field.rep = Representation::momentum;
}

std::vector<double> momentum_density(const Grid& grid, const WaveField& field) {
    require_momentum(field, "momentum_density");
    std::vector<double> density(field.amplitudes.size());
    const double n2 = static_cast<double>(grid.n()) * grid.n();
    for (std::size_t i = 0; i < density.size(); ++i)
        density[i] = std::norm(field.amplitudes[i]) / n2;
    return density;
}

WaveField to_interaction_picture(const Grid& grid, const WaveField& field) {
    require_momentum(field, "to_interaction_picture");
    WaveField out = field;
    for (std::size_t i = 0; i < out.amplitudes.size(); ++i)
        out.amplitudes[i] *= std::polar(1.0, 0.5 * grid.ksq()[i] * field.time);
    return out;
}

WaveField strang_step(const Grid& grid, const WaveField& field,
                      const PotentialField& potential, const EvolveConfig& cfg) {
    require_momentum(field, "strang_step");
    StrangTables tables(grid, potential, cfg);
    WaveField out = field;
    tables.step(out, cfg.tau);
    return out;
}

WaveField evolve(const Grid& grid, WaveField field,
                 const PotentialField& potential, const EvolveConfig& cfg,
                 const RecordSink& sink) {
    require_momentum(field, "evolve");
    if (!(cfg.tau > 0.0))
        throw std::invalid_argument("evolve: tau must be > 0");
    if (cfg.n_steps < 0)
        throw std::invalid_argument("evolve: n_steps must be >= 0");
    if (cfg.record_every < 1)
        throw std::invalid_argument("evolve: record_every must be >= 1");
    if (cfg.n_steps == 0) return field;
    StrangTables tables(grid, potential, cfg);
    for (long step = 1; step <= cfg.n_steps; ++step) {
        tables.step(field, cfg.tau);
        if (sink && step % cfg.record_every == 0) sink(step, field);
    }
    return field;
}

} // namespace qbroad
