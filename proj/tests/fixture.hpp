#pragma once

#include <memory>

#include "cohap/adl.hpp"
#include "cohap/feasibility.hpp"
#include "cohap/grounder.hpp"
#include "util.hpp"

namespace testutil {

struct Baseline {
  cohap::adl::DomainSpec dom = cohap::adl::parse_domain(slurp("data/assembly.adlh"));
  cohap::adl::InstanceSpec inst = cohap::adl::parse_instance(slurp("tests/fixtures/baseline.json"), dom);
  std::shared_ptr<const cohap::feas::Workspace> ws = std::make_shared<cohap::feas::Workspace>(
      cohap::feas::Workspace::from_json(slurp("data/bench.json")));
  std::shared_ptr<cohap::feas::FeasibilityOracle> fx = cohap::feas::FeasibilityOracle::for_workspace(ws);

  cohap::ground::GroundProblem ground(cohap::ground::GroundOptions opt = {}) {
    return cohap::ground::ground(dom, inst, *fx, opt);
  }
};

}  // namespace testutil
