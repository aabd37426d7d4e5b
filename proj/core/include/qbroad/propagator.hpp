#ifndef QBROAD_PROPAGATOR_HPP
#define QBROAD_PROPAGATOR_HPP

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "qbroad/grid.hpp"
#include "qbroad/random_field.hpp"
#include "qbroad/spectral.hpp"

namespace qbroad {

enum class Representation { position, momentum };

/// Complex wave amplitudes on the lattice, tagged with the representation
/// of the last transform applied. In momentum representation the mode
/// occupation is n_k = |a_k|^2 / N^2, normalized so an initial plane wave
/// has sum_k n_k = 1.
struct WaveField {
    Representation rep = Representation::momentum;
    double time = 0.0;
    std::vector<cdouble> amplitudes;
};

struct EvolveConfig {
    double epsilon = 0.0;
    double tau = 0.0;        // time step; default 1/kp^2, see default_tau
    long n_steps = 0;
    long record_every = 1;
};

inline double default_tau(double kp) { return 1.0 / (kp * kp); }

/// Plane wave at lattice mode kp, unit norm, momentum representation.
WaveField init_plane_wave(const Grid& grid, const std::array<int, 2>& kp);

/// Parseval-consistent total norm: sqrt(sum_x |a|^2) in position
/// representation, sqrt(sum_k |a|^2)/N in momentum representation.
double norm(const Grid& grid, const WaveField& field);

void to_position(const Grid& grid, WaveField& field);
void to_momentum(const Grid& grid, WaveField& field);

/// Mode occupations n_k = |a_k|^2/N^2; field must be in momentum rep.
std::vector<double> momentum_density(const Grid& grid, const WaveField& field);

/// Removes the free-evolution phase: multiplies mode k by e^{+i|k|^2 t/2}.
/// Occupations |a_k| are unchanged.
WaveField to_interaction_picture(const Grid& grid, const WaveField& field);

/// One Strang step e^{-i tau K/2} F e^{-i tau eps V} F^{-1} e^{-i tau K/2}
/// with K(k) = |k|^2/2, acting on a momentum-representation field.
WaveField strang_step(const Grid& grid, const WaveField& field,
                      const PotentialField& potential, const EvolveConfig& cfg);

using RecordSink = std::function<void(long step, const WaveField&)>;

/// Applies cfg.n_steps Strang steps, invoking sink with the (momentum
/// representation) field every cfg.record_every steps. Reuses cached
/// phase tables, so the result is bit-identical to repeated strang_step.
WaveField evolve(const Grid& grid, WaveField field,
                 const PotentialField& potential, const EvolveConfig& cfg,
                 const RecordSink& sink = {});

} // namespace qbroad

#endif
