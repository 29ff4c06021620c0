#pragma once

#include "irqracer/ast.hpp"

#include <map>
#include <set>
#include <string>

namespace irqr {

// Names are routine-qualified: a global or register keeps its plain name, a
// local or parameter of routine R becomes "R::x". A dereference site through
// pointer p is the name "*p" (qualified pointer inside).
std::string qualified_name(const Program& p, const std::string& routine, const std::string& name);

// Flow-insensitive inclusion-based points-to plus the symmetric, transitively
// closed may-alias relation derived from it. Registers never appear.
struct AliasSet {
    std::map<std::string, std::set<std::string>> pts; // pointer -> pointees

    bool alias(const std::string& a, const std::string& b) const;
    std::set<std::string> of(const std::string& name) const; // alias class incl. name

    // all pairs, for tests and reporting
    std::set<std::pair<std::string, std::string>> pairs() const;

    void finalize(); // rebuild the closure after pts changes

private:
    std::map<std::string, std::set<std::string>> cls_; // name -> class members
};

// Intra-routine Andersen over the four inclusion rules (address-of, copy,
// load, store); result restricted to the routine's names and globals.
AliasSet andersen_points_to(const Program& p, const Routine& r);

// Whole-program linking: every call (task call or ISR registration, which is
// treated as an immediate call) merges argument aliases into parameter
// aliases; iterated to a global fixpoint.
AliasSet link_alias_sets(const Program& p);

} // namespace irqr
