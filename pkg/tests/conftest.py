import numpy as np
import pytest

from graspmass.model_io import fixture_path, parse_urdf, parse_urdf_file


@pytest.fixture(scope="session")
def arm_model():
    return parse_urdf_file(fixture_path("service_arm_left.urdf"))


@pytest.fixture(scope="session")
def robot_model():
    return parse_urdf_file(fixture_path("service_robot.urdf"), require_chain=False)


@pytest.fixture(scope="session")
def katana_model():
    return parse_urdf_file(fixture_path("katana.urdf"))


# Planar 2-link used by the closed-form dynamics oracle: two y-axis pitch
# joints, links hanging along -z, zero damping so the rigid-body terms are
# isolated.  Numbers deliberately non-round.
TWO_LINK_URDF = """
<robot name="twolink">
  <link name="base">
    <inertial>
      <mass value="1.0"/>
      <origin xyz="0 0 0"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
    </inertial>
  </link>
  <joint name="j1" type="revolute">
    <parent link="base"/>
    <child link="l1"/>
    <origin xyz="0 0 0" rpy="0 0 0"/>
    <axis xyz="0 1 0"/>
    <limit lower="-50" upper="50" effort="200" velocity="50"/>
    <dynamics damping="0"/>
  </joint>
  <link name="l1">
    <inertial>
      <mass value="1.7"/>
      <origin xyz="0 0 -0.23"/>
      <inertia ixx="0.031" ixy="0" ixz="0" iyy="0.029" iyz="0" izz="0.004"/>
    </inertial>
  </link>
  <joint name="j2" type="revolute">
    <parent link="l1"/>
    <child link="l2"/>
    <origin xyz="0 0 -0.41" rpy="0 0 0"/>
    <axis xyz="0 1 0"/>
    <limit lower="-50" upper="50" effort="200" velocity="50"/>
    <dynamics damping="0"/>
  </joint>
  <link name="l2">
    <inertial>
      <mass value="0.9"/>
      <origin xyz="0 0 -0.17"/>
      <inertia ixx="0.012" ixy="0" ixz="0" iyy="0.011" iyz="0" izz="0.002"/>
    </inertial>
  </link>
</robot>
"""


@pytest.fixture(scope="session")
def two_link():
    return parse_urdf(TWO_LINK_URDF)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
