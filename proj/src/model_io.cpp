#include "co2occ/model_io.hpp"

namespace co2occ {

namespace {

std::vector<double> read_vector(const KeyValueDocument& doc, const char* section, std::size_t n) {
    auto values = doc.get_doubles(section, "values");
    if (values.size() != n) {
        throw ValidationError(std::string("model file: [") + section + "] expected " +
                              std::to_string(n) + " values, got " +
                              std::to_string(values.size()));
    }
    return values;
}

}  // namespace

void write_physics(KeyValueDocument& doc, const PhysicsConfig& physics) {
    doc.set("physics", "ambient_co2", format_double(physics.ambient_co2));
    doc.set("physics", "regimes", format_doubles(physics.regimes));
    doc.set("physics", "person_rate", format_double(physics.person_rate));
    doc.set("physics", "dt", format_double(physics.dt));
    doc.set("physics", "max_occupancy", std::to_string(physics.max_occupancy));
}

PhysicsConfig read_physics(const KeyValueDocument& doc) {
    PhysicsConfig p;
    p.ambient_co2 = doc.get_double("physics", "ambient_co2", p.ambient_co2);
    if (doc.find("physics", "regimes")) p.regimes = doc.get_doubles("physics", "regimes");
    p.person_rate = doc.get_double("physics", "person_rate", p.person_rate);
    p.dt = doc.get_double("physics", "dt", p.dt);
    p.max_occupancy = static_cast<int>(doc.get_int("physics", "max_occupancy", p.max_occupancy));
    p.validate();
    return p;
}

KeyValueDocument model_to_document(const SwitchingARModel& model) {
    KeyValueDocument doc;
    write_physics(doc, model.physics());

    const std::size_t n = model.num_states();
    doc.set("states", "count", std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
        const StateLabel s = model.space().label(i);
        doc.set("states", std::to_string(i),
                std::to_string(s.occupancy) + " " + std::to_string(s.regime));
    }
    const ModelParams& p = model.params();
    doc.set("c", "values", format_doubles(p.c));
    doc.set("mu", "values", format_doubles(p.mu));
    doc.set("sigma", "values", format_doubles(p.sigma));
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = p.trans.row(r);
        doc.set("trans", std::to_string(r), format_doubles({row.begin(), row.end()}));
    }
    doc.set("init", "values", format_doubles(p.init));
    return doc;
}

SwitchingARModel model_from_document(const KeyValueDocument& doc) {
    PhysicsConfig physics = read_physics(doc);
    const StateSpace space = build_state_space(physics);
    const std::size_t n = space.size();

    const auto count = doc.get_int("states", "count");
    if (count < 0 || static_cast<std::size_t>(count) != n) {
        throw ValidationError("model file: [states] count " + std::to_string(count) +
                              " does not match physics (" + std::to_string(n) + " states)");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto pair = doc.get_doubles("states", std::to_string(i));
        const StateLabel expect = space.label(i);
        if (pair.size() != 2 || pair[0] != expect.occupancy || pair[1] != expect.regime) {
            throw ValidationError("model file: [states] entry " + std::to_string(i) +
                                  " is not (occupancy " + std::to_string(expect.occupancy) +
                                  ", regime " + std::to_string(expect.regime) + ")");
        }
    }

    ModelParams p;
    p.c = read_vector(doc, "c", n);
    p.mu = read_vector(doc, "mu", n);
    p.sigma = read_vector(doc, "sigma", n);
    p.init = read_vector(doc, "init", n);
    p.trans = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = doc.get_doubles("trans", std::to_string(r));
        if (row.size() != n) {
            throw ValidationError("model file: [trans] row " + std::to_string(r) +
                                  " has " + std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(n));
        }
        for (std::size_t c = 0; c < n; ++c) p.trans(r, c) = row[c];
    }
    return SwitchingARModel(std::move(physics), std::move(p));
}

void save_model(const std::string& path, const SwitchingARModel& model) {
    model_to_document(model).save(path);
}

SwitchingARModel load_model(const std::string& path) {
    return model_from_document(KeyValueDocument::load(path));
}

}  // namespace co2occ
