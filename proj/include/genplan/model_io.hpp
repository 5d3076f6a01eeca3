#pragma once

#include <string>

#include "genplan/action_policy.hpp"
#include "genplan/autodiff/params.hpp"
#include "genplan/errors.hpp"

namespace genplan {

// Predicate names and arities in declaration order; a network only applies
// to domains with the same signature.
inline std::string predicate_signature(const pddl::DomainDef& d) {
  std::string out;
  for (const auto& p : d.predicates) {
    if (!out.empty()) out += ',';
    out += p.name + '/' + std::to_string(p.arity);
  }
  return out;
}

inline ad::Metadata network_metadata(const PolicyNetwork<float>& net, const pddl::DomainDef& domain) {
  return {{"arch", arch_name(net.arch())},
          {"hidden", std::to_string(net.hidden())},
          {"history", std::to_string(net.layout().K)},
          {"domain", domain.name},
          {"predicates", predicate_signature(domain)}};
}

inline void save_network(const std::string& path, const PolicyNetwork<float>& net, const pddl::DomainDef& domain,
                         ad::Metadata extra = {}) {
  ad::Metadata meta = network_metadata(net, domain);
  meta.insert(extra.begin(), extra.end());
  ad::save_checkpoint(path, net.params(), meta);
}

inline PolicyNetwork<float> network_from_checkpoint(ad::Checkpoint ckpt, const pddl::DomainDef& domain) {
  auto field = [&](const char* key) -> const std::string& {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw LayoutMismatch(std::string("checkpoint lacks '") + key + "'");
    return it->second;
  };
  if (field("predicates") != predicate_signature(domain))
    throw LayoutMismatch("checkpoint was trained on domain '" + field("domain") + "' whose predicates differ from '" +
                         domain.name + "'");
  std::size_t hidden = 0;
  int history = 0;
  try {
    hidden = std::stoul(field("hidden"));
    history = std::stoi(field("history"));
  } catch (const std::logic_error&) {
    throw LayoutMismatch("checkpoint has malformed network dimensions");
  }
  return PolicyNetwork<float>(parse_arch(field("arch")), hidden, build_layout(domain, history),
                              std::move(ckpt.params));
}

inline PolicyNetwork<float> load_network(const std::string& path, const pddl::DomainDef& domain) {
  return network_from_checkpoint(ad::load_checkpoint(path), domain);
}

}  // namespace genplan
