#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dsn/agent.hpp"
#include "dsn/errors.hpp"
#include "dsn/forward_model.hpp"
#include "dsn/planner.hpp"

namespace py = pybind11;
using namespace dsn;

namespace {

StateMatrix state(const std::vector<std::uint8_t>& types, const EnvSpec& spec)
{
  if (static_cast<int>(types.size()) != spec.entities())
    throw ContractViolation("type map has " + std::to_string(types.size()) + " cells, expected " +
                            std::to_string(spec.entities()));
  return StateMatrix::from_types(types, spec.num_types);
}

std::vector<std::uint8_t> types_of(const StateMatrix& s)
{
  // Highest set attribute per cell, so superimposed predictions keep the ball.
  std::vector<std::uint8_t> out(static_cast<std::size_t>(s.entities()), 0);
  for (int e = 0; e < s.entities(); ++e)
    for (int j = s.attributes() - 1; j >= 0; --j)
      if (s.get(e, j)) {
        out[static_cast<std::size_t>(e)] = static_cast<std::uint8_t>(j);
        break;
      }
  return out;
}

}  // namespace

PYBIND11_MODULE(_dsn, m)
{
  m.doc() = "Delta schema network core";
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);

  py::class_<BreakoutConfig>(m, "BreakoutConfig")
      .def(py::init<>())
      .def_readwrite("width", &BreakoutConfig::width)
      .def_readwrite("height", &BreakoutConfig::height)
      .def_readwrite("brick_row_first", &BreakoutConfig::brick_row_first)
      .def_readwrite("brick_row_last", &BreakoutConfig::brick_row_last)
      .def_readwrite("brick_col_first", &BreakoutConfig::brick_col_first)
      .def_readwrite("brick_col_last", &BreakoutConfig::brick_col_last)
      .def_readwrite("paddle_width", &BreakoutConfig::paddle_width)
      .def_readwrite("lives", &BreakoutConfig::lives)
      .def_readwrite("max_steps", &BreakoutConfig::max_steps)
      .def_readwrite("num_balls", &BreakoutConfig::num_balls)
      .def_property_readonly("brick_count", &BreakoutConfig::brick_count)
      .def("validate", &BreakoutConfig::validate);

  py::class_<Breakout>(m, "Breakout")
      .def(py::init<BreakoutConfig>(), py::arg("config") = BreakoutConfig{})
      .def("reset", [](Breakout& b, std::uint64_t seed) { return b.reset(seed).type_map; }, py::arg("seed"))
      .def("step",
           [](Breakout& b, int action) {
             Observation o = b.step(action);
             return py::make_tuple(o.type_map, o.reward, o.done);
           })
      .def_property_readonly("done", &Breakout::done)
      .def_property_readonly("lives", [](const Breakout& b) { return b.state().lives; })
      .def_property_readonly("bricks_destroyed", [](const Breakout& b) { return b.state().bricks_destroyed; })
      .def("type_map", &Breakout::type_map)
      .def("render", &Breakout::render_ascii);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("env", &RunConfig::env)
      .def_readwrite("window", &RunConfig::window)
      .def_readwrite("horizon", &RunConfig::horizon)
      .def_readwrite("cap", &RunConfig::cap)
      .def_readwrite("episodes", &RunConfig::episodes)
      .def_readwrite("seeds", &RunConfig::seeds)
      .def_readwrite("warmup_episodes", &RunConfig::warmup_episodes)
      .def_readwrite("explore_epsilon", &RunConfig::explore_epsilon)
      .def("set", &apply_config_entry, py::arg("key"), py::arg("value"), "apply one config-file entry")
      .def("validate", &RunConfig::validate)
      .def_property_readonly("row_length", [](const RunConfig& c) { return c.env_spec().row_length(); });

  m.def(
      "parse_config",
      [](const std::string& text) {
        std::istringstream is(text);
        return parse_config(is);
      },
      py::arg("text"));

  py::class_<ParameterSet>(m, "ParameterSet")
      .def(py::init([](const RunConfig& c) {
             EnvSpec s = c.env_spec();
             return ParameterSet(s.num_types, static_cast<std::size_t>(s.row_length()), c.cap);
           }),
           py::arg("config"))
      .def("total_schemas", &ParameterSet::total_schemas)
      .def("counts",
           [](const ParameterSet& p) {
             py::dict d;
             for (const MatrixTag& t : p.tags()) d[py::str(t.str())] = p.matrix(t).size();
             return d;
           })
      .def("__eq__", [](const ParameterSet& a, const ParameterSet& b) { return a == b; });

  m.def(
      "save_params",
      [](const ParameterSet& p, const RunConfig& c) {
        std::ostringstream os;
        save_params(p, c.env_spec(), os);
        return os.str();
      },
      py::arg("params"), py::arg("config"), "serialize to the text format");
  m.def(
      "load_params",
      [](const std::string& text, const RunConfig& c) {
        std::istringstream is(text);
        return load_params(is, c.env_spec(), c.cap);
      },
      py::arg("text"), py::arg("config"));

  py::class_<EpisodeRecord>(m, "EpisodeRecord")
      .def_readonly("episode", &EpisodeRecord::episode)
      .def_readonly("seed", &EpisodeRecord::seed)
      .def_readonly("total_reward", &EpisodeRecord::total_reward)
      .def_readonly("steps", &EpisodeRecord::steps)
      .def_readonly("bricks", &EpisodeRecord::bricks)
      .def_readonly("lives_lost", &EpisodeRecord::lives_lost)
      .def_readonly("plans_ok", &EpisodeRecord::plans_ok)
      .def_readonly("plans_tried", &EpisodeRecord::plans_tried)
      .def_readonly("schemas", &EpisodeRecord::schemas);

  m.def(
      "run_training",
      [](const RunConfig& c) {
        TrainingResult r;
        {
          py::gil_scoped_release nogil;
          r = run_training(c);
        }
        return py::make_tuple(r.records, r.params);
      },
      py::arg("config"), "returns (records, params)");
  m.def(
      "run_eval",
      [](const RunConfig& c, const ParameterSet& p, int balls) {
        py::gil_scoped_release nogil;
        return run_eval(c, p, balls);
      },
      py::arg("config"), py::arg("params"), py::arg("num_balls") = 1);
  m.def("mean_reward", &mean_reward);
  m.def("metrics_csv", [](const std::vector<EpisodeRecord>& r) {
    std::ostringstream os;
    emit_metrics(r, os);
    return os.str();
  });

  m.def(
      "predict",
      [](const ParameterSet& p, const RunConfig& c, const std::vector<std::uint8_t>& prev,
         const std::vector<std::uint8_t>& curr, int action) {
        EnvSpec s = c.env_spec();
        CompiledParams model(p, s);
        StepPrediction out = predict_action(FrameStack{state(prev, s), state(curr, s)}, model, action);
        return py::make_tuple(types_of(out.next), out.reward_pos, out.reward_neg);
      },
      py::arg("params"), py::arg("config"), py::arg("prev"), py::arg("curr"), py::arg("action"),
      "one-step prediction under a single action: (type map, reward+, reward-)");
  m.def(
      "plan",
      [](const ParameterSet& p, const RunConfig& c, const std::vector<std::uint8_t>& prev,
         const std::vector<std::uint8_t>& curr) -> py::object {
        EnvSpec s = c.env_spec();
        CompiledParams model(p, s);
        FactorGraph g = unroll(FrameStack{state(prev, s), state(curr, s)}, model, c.horizon);
        PlannerOptions o = c.planner;
        o.prefer_constrained = c.prefer_constrained;
        o.avoid_negative_reward = c.avoid_negative_reward;
        o.search_fallback = c.search_fallback;
        o.require_escape = c.require_escape;
        auto res = Planner(g, o).plan(&model);
        if (!res) return py::none();
        return py::cast(res->actions);
      },
      py::arg("params"), py::arg("config"), py::arg("prev"), py::arg("curr"),
      "action list reaching the first plannable reward, or None");
}
