#pragma once

#include "cmpx/core/types.hpp"

namespace cmpx {

/// Point-robot collision query over configurations.
class CollisionWorld {
public:
    virtual ~CollisionWorld() = default;
    virtual bool in_collision(const Config& q) const = 0;
};

class EmptyWorld final : public CollisionWorld {
public:
    bool in_collision(const Config&) const override { return false; }
};

}  // namespace cmpx
