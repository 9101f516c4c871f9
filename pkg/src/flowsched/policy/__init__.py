"""
**flowsched.policy**: the scheduling policies
---------------------------------------------

Each module exposes its policy as a class inheriting from
:class:`~flowsched.policyinterface_1_0.ModelInterface`; the classes are looked up
by name in :mod:`flowsched.policies`.

"""
