#include "sfset/model_io.hpp"

#include <fstream>
#include <iomanip>

namespace sfs {

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, Eigen::Index rows, Eigen::Index cols) {
    if (!j.is_array()) throw DimensionMismatch("matrix must be a JSON array");
    Matrix m(rows, cols);
    if (!j.empty() && j.front().is_array()) {
        if (static_cast<Eigen::Index>(j.size()) != rows)
            throw DimensionMismatch("matrix has wrong number of rows");
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Json& row = j[static_cast<std::size_t>(i)];
            if (static_cast<Eigen::Index>(row.size()) != cols)
                throw DimensionMismatch("matrix row has wrong length");
            for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
    } else {
        // flat row-major
        if (static_cast<Eigen::Index>(j.size()) != rows * cols)
            throw DimensionMismatch("flat matrix has wrong length");
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index c = 0; c < cols; ++c)
                m(i, c) = j[static_cast<std::size_t>(i * cols + c)].get<double>();
    }
    return m;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Vector vector_from_json(const Json& j) {
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

namespace {

Eigen::Index rows_of(const Json& m) { return static_cast<Eigen::Index>(m.size()); }

Eigen::Index cols_of(const Json& m, Eigen::Index k) {
    if (!m.empty() && m.front().is_array()) return static_cast<Eigen::Index>(m.front().size());
    return static_cast<Eigen::Index>(m.size()) / k;
}

std::vector<Matrix> feature_tables(const Json& j, Eigen::Index k) {
    std::vector<Matrix> out;
    for (const Json& f : j) {
        const Eigen::Index d = f.front().is_array() ? rows_of(f) : static_cast<Eigen::Index>(f.size()) / k;
        out.push_back(matrix_from_json(f, d, k));
    }
    return out;
}

}  // namespace

Json to_json(const PsrModel& model) {
    Json j;
    j["k"] = model.k();
    j["num_actions"] = model.num_actions();
    j["num_observations"] = model.num_observations();
    j["d"] = model.d();
    j["gamma"] = model.gamma();
    j["q1"] = vector_to_json(model.q1());
    j["u"] = vector_to_json(model.u());
    Json T = Json::array();
    for (int a = 0; a < model.num_actions(); ++a) {
        Json per_action = Json::array();
        for (int o = 0; o < model.num_observations(); ++o) per_action.push_back(matrix_to_json(model.T(a, o)));
        T.push_back(std::move(per_action));
    }
    j["T"] = std::move(T);
    Json F = Json::array();
    for (int a = 0; a < model.num_actions(); ++a) F.push_back(matrix_to_json(model.F(a)));
    j["F"] = std::move(F);
    return j;
}

PsrModel psr_from_json(const Json& j) {
    const auto k = j.at("k").get<Eigen::Index>();
    const int A = j.at("num_actions").get<int>();
    const int O = j.at("num_observations").get<int>();
    const Json& T = j.at("T");
    if (static_cast<int>(T.size()) != A) throw DimensionMismatch("T must have one entry per action");
    std::vector<std::vector<Matrix>> ops(static_cast<std::size_t>(A));
    for (int a = 0; a < A; ++a) {
        if (static_cast<int>(T[a].size()) != O)
            throw DimensionMismatch("T[a] must have one entry per observation");
        for (int o = 0; o < O; ++o) ops[a].push_back(matrix_from_json(T[a][o], k, k));
    }
    std::vector<Matrix> F = feature_tables(j.at("F"), k);
    if (static_cast<int>(F.size()) != A) throw DimensionMismatch("F must have one entry per action");
    return PsrModel(vector_from_json(j.at("q1")), vector_from_json(j.at("u")), std::move(ops),
                    std::move(F), j.at("gamma").get<double>());
}

Json to_json(const MdpSpec& spec) {
    Json j;
    j["type"] = "mdp";
    j["gamma"] = spec.gamma;
    j["b1"] = vector_to_json(spec.b1);
    Json T = Json::array();
    for (const Matrix& t : spec.transitions) T.push_back(matrix_to_json(t));
    j["transitions"] = std::move(T);
    Json F = Json::array();
    for (const Matrix& f : spec.features) F.push_back(matrix_to_json(f));
    j["features"] = std::move(F);
    return j;
}

Json to_json(const PomdpSpec& spec) {
    Json j = to_json(MdpSpec{spec.transitions, spec.features, spec.b1, spec.gamma});
    j["type"] = "pomdp";
    j["observation_matrix"] = matrix_to_json(spec.observation);
    return j;
}

MdpSpec mdp_from_json(const Json& j) {
    MdpSpec spec;
    spec.gamma = j.at("gamma").get<double>();
    spec.b1 = vector_from_json(j.at("b1"));
    const Eigen::Index k = spec.b1.size();
    for (const Json& t : j.at("transitions")) spec.transitions.push_back(matrix_from_json(t, k, k));
    spec.features = feature_tables(j.at("features"), k);
    validate(spec);
    return spec;
}

PomdpSpec pomdp_from_json(const Json& j) {
    MdpSpec base = mdp_from_json(j);
    PomdpSpec spec{std::move(base.transitions), Matrix(), std::move(base.features), std::move(base.b1),
                   base.gamma};
    const Json& D = j.at("observation_matrix");
    spec.observation = matrix_from_json(D, rows_of(D), cols_of(D, spec.b1.size()));
    validate(spec);
    return spec;
}

PsrModel load_model(const std::string& path) {
    const Json j = load_json(path);
    if (j.contains("T")) return psr_from_json(j);
    if (j.contains("observation_matrix")) return pomdp_to_psr(pomdp_from_json(j));
    return mdp_to_psr(mdp_from_json(j));
}

void save_json(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << j.dump(1) << '\n';
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return Json::parse(in);
}

}  // namespace sfs
