#include "dyncontract/game_io.hpp"

#include <fstream>

namespace dyncontract {

namespace {

Matrix matrix_from(const nlohmann::json& j, const char* key, std::size_t rows, std::size_t cols) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != rows)
        throw InvalidInput(std::string("'") + key + "' must have " + std::to_string(rows) + " rows");
    Matrix m = Matrix::Zero(Eigen::Index(rows), Eigen::Index(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto& row = j[key][r];
        if (!row.is_array() || row.size() != cols)
            throw InvalidInput(std::string("'") + key + "' rows must have " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c) m(Eigen::Index(r), Eigen::Index(c)) = row[c].get<double>();
    }
    return m;
}

template <class T>
T required(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw InvalidInput(std::string("missing key '") + key + "'");
    return j[key].get<T>();
}

}  // namespace

DiscountedGame game_from_json(const nlohmann::json& j) {
    try {
        auto states = required<std::vector<std::string>>(j, "states");
        auto actions = required<std::vector<std::string>>(j, "actions");
        const std::size_t ns = states.size(), na = actions.size();
        if (ns == 0 || na == 0) throw InvalidInput("states and actions must be non-empty");
        Matrix u = matrix_from(j, "u", na, ns);
        Matrix v = matrix_from(j, "v", na, ns);
        StageGame stage(std::move(states), std::move(actions), u, v, required<double>(j, "k"));
        auto p = required<std::vector<double>>(j, "prior");
        if (p.size() != ns) throw InvalidInput("prior length must match the number of states");
        Belief prior(p);
        MarkovChain chain = j.contains("transition") ? MarkovChain(matrix_from(j, "transition", ns, ns))
                                                     : MarkovChain::iid(prior);
        const double bound = j.value("promise_bound", 0.0);
        return DiscountedGame(std::move(stage), std::move(chain), prior, required<double>(j, "discount"), bound);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("bad game specification: ") + e.what());
    }
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

nlohmann::json belief_to_json(const Belief& b) { return b.to_vector(); }

nlohmann::json game_to_json(const DiscountedGame& game) {
    const StageGame& st = game.stage();
    nlohmann::json j;
    j["states"] = st.states();
    j["actions"] = st.actions();
    j["u"] = matrix_to_json(st.u());
    j["v"] = matrix_to_json(st.v());
    j["k"] = st.k();
    j["prior"] = belief_to_json(game.prior());
    j["discount"] = game.discount();
    if (!game.chain().is_iid() || !game.chain().step(game.prior()).near(game.prior(), 0.0))
        j["transition"] = matrix_to_json(game.chain().rows());
    j["promise_bound"] = game.promise_bound();
    return j;
}

RideGame ride_from_json(const nlohmann::json& j) {
    try {
        RideGame r;
        r.c = required<std::vector<double>>(j, "c");
        r.mu0 = required<std::vector<double>>(j, "mu0");
        r.n = j.value("n", r.c.size());
        r.k = required<double>(j, "k");
        r.discount = required<double>(j, "discount");
        r.validate();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("bad ride specification: ") + e.what());
    }
}

nlohmann::json ride_to_json(const RideGame& ride) {
    return {{"n", ride.n}, {"c", ride.c}, {"mu0", ride.mu0}, {"k", ride.k}, {"discount", ride.discount}};
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path + ": " + e.what());
    }
}

}  // namespace dyncontract
